#include "coalition_prune/coalition.hpp"

#include <bit>

#include "coalition_prune/error.hpp"
#include "coalition_prune/rng.hpp"

namespace cprune {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::argument: return "argument error";
    case ErrorCode::game_contract: return "game contract violation";
    case ErrorCode::capacity: return "capacity error";
    case ErrorCode::undefined: return "undefined quantity";
    case ErrorCode::checkpoint: return "checkpoint error";
    case ErrorCode::external: return "external evaluator failure";
    case ErrorCode::unsupported: return "unsupported game";
    case ErrorCode::parse: return "parse error";
    case ErrorCode::io: return "i/o error";
  }
  return "unknown error";
}

HeadLayout::HeadLayout(std::size_t n_players, std::size_t heads_per_layer)
    : n_players_(n_players),
      heads_per_layer_(heads_per_layer == 0
                           ? (n_players == 0 ? 1 : n_players)
                           : heads_per_layer) {}

HeadCoordinate HeadLayout::coordinate(PlayerId player) const {
  if (player >= n_players_) {
    throw Error(ErrorCode::argument,
                "player " + std::to_string(player) + " out of range");
  }
  return {player / heads_per_layer_, player % heads_per_layer_};
}

PlayerId HeadLayout::flat(HeadCoordinate coordinate) const {
  const PlayerId player =
      coordinate.layer * heads_per_layer_ + coordinate.head;
  if (coordinate.head >= heads_per_layer_ || player >= n_players_) {
    throw Error(ErrorCode::argument, "head coordinate out of range");
  }
  return player;
}

Coalition::Coalition(std::size_t width)
    : width_(width), words_((width + 63) / 64, 0) {}

Coalition Coalition::grand(std::size_t width) {
  Coalition c(width);
  for (std::size_t w = 0; w < c.words_.size(); ++w) {
    const std::size_t bits = std::min<std::size_t>(64, width - 64 * w);
    c.words_[w] = bits == 64 ? ~0ULL : ((1ULL << bits) - 1);
  }
  return c;
}

Coalition Coalition::from_bits(std::size_t width, std::uint64_t bits) {
  if (width > 64) {
    throw Error(ErrorCode::argument, "from_bits supports at most 64 players");
  }
  Coalition c(width);
  if (width > 0) {
    c.words_[0] = width == 64 ? bits : (bits & ((1ULL << width) - 1));
  }
  return c;
}

Coalition Coalition::from_mask(std::span<const std::uint8_t> mask) {
  Coalition c(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i] > 1) {
      throw Error(ErrorCode::argument, "mask entries must be 0 or 1");
    }
    if (mask[i]) c.insert(i);
  }
  return c;
}

Coalition Coalition::from_string(const std::string& bits) {
  Coalition c(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] == '1') {
      c.insert(i);
    } else if (bits[i] != '0') {
      throw Error(ErrorCode::parse, "mask string must contain only 0 and 1");
    }
  }
  return c;
}

void Coalition::check(PlayerId player) const {
  if (player >= width_) {
    throw Error(ErrorCode::argument,
                "player " + std::to_string(player) +
                    " out of range for coalition of width " +
                    std::to_string(width_));
  }
}

bool Coalition::contains(PlayerId player) const {
  check(player);
  return (words_[player / 64] >> (player % 64)) & 1ULL;
}

std::size_t Coalition::count() const {
  std::size_t total = 0;
  for (auto w : words_) total += static_cast<std::size_t>(std::popcount(w));
  return total;
}

void Coalition::insert(PlayerId player) {
  check(player);
  words_[player / 64] |= 1ULL << (player % 64);
}

void Coalition::erase(PlayerId player) {
  check(player);
  words_[player / 64] &= ~(1ULL << (player % 64));
}

Coalition Coalition::with(PlayerId player) const {
  Coalition c = *this;
  c.insert(player);
  return c;
}

Coalition Coalition::without(PlayerId player) const {
  Coalition c = *this;
  c.erase(player);
  return c;
}

std::vector<std::uint8_t> Coalition::to_mask() const {
  std::vector<std::uint8_t> mask(width_);
  for (std::size_t i = 0; i < width_; ++i) mask[i] = contains(i) ? 1 : 0;
  return mask;
}

std::string Coalition::to_string() const {
  std::string s(width_, '0');
  for (std::size_t i = 0; i < width_; ++i) {
    if (contains(i)) s[i] = '1';
  }
  return s;
}

std::size_t CoalitionHash::operator()(const Coalition& coalition) const {
  std::uint64_t h = mix64(coalition.width() + 0x51ed2701ULL);
  for (auto w : coalition.words()) h = mix64(h ^ w);
  return static_cast<std::size_t>(h);
}

}  // namespace cprune
