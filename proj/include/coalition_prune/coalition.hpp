#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace cprune {

using PlayerId = std::size_t;

struct HeadCoordinate {
  std::size_t layer = 0;
  std::size_t head = 0;

  friend bool operator==(const HeadCoordinate&, const HeadCoordinate&) = default;
};

// Maps flat player indices onto (layer, head). Games without a layered
// structure use a single layer holding every player.
class HeadLayout {
 public:
  HeadLayout() = default;
  HeadLayout(std::size_t n_players, std::size_t heads_per_layer);

  std::size_t heads_per_layer() const { return heads_per_layer_; }
  HeadCoordinate coordinate(PlayerId player) const;
  PlayerId flat(HeadCoordinate coordinate) const;

 private:
  std::size_t n_players_ = 0;
  std::size_t heads_per_layer_ = 1;
};

// Fixed-width set of active players.
class Coalition {
 public:
  Coalition() = default;
  explicit Coalition(std::size_t width);

  static Coalition empty(std::size_t width) { return Coalition(width); }
  static Coalition grand(std::size_t width);
  // Low `width` bits of `bits`; width must be <= 64.
  static Coalition from_bits(std::size_t width, std::uint64_t bits);
  static Coalition from_mask(std::span<const std::uint8_t> mask);
  // Parses a "0/1" string, first character is player 0.
  static Coalition from_string(const std::string& bits);

  std::size_t width() const { return width_; }
  bool contains(PlayerId player) const;
  std::size_t count() const;

  void insert(PlayerId player);
  void erase(PlayerId player);

  Coalition with(PlayerId player) const;
  Coalition without(PlayerId player) const;

  std::vector<std::uint8_t> to_mask() const;
  std::string to_string() const;
  std::span<const std::uint64_t> words() const { return words_; }

  friend bool operator==(const Coalition&, const Coalition&) = default;

 private:
  void check(PlayerId player) const;

  std::size_t width_ = 0;
  std::vector<std::uint64_t> words_;
};

struct CoalitionHash {
  std::size_t operator()(const Coalition& coalition) const;
};

}  // namespace cprune
