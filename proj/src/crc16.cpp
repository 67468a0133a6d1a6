#include "simopac/crc16.hpp"

#include <array>

namespace simopac {

namespace {
std::array<std::uint16_t, 256> make_table() {
  std::array<std::uint16_t, 256> table{};
  for (std::uint16_t i = 0; i < 256; ++i) {
    std::uint16_t crc = static_cast<std::uint16_t>(i << 8);
    for (int bit = 0; bit < 8; ++bit) {
      crc = (crc & 0x8000) ? static_cast<std::uint16_t>((crc << 1) ^ 0x1021)
                           : static_cast<std::uint16_t>(crc << 1);
    }
    table[i] = crc;
  }
  return table;
}
}  // namespace

std::uint16_t crc16_ccitt_false(std::span<const std::uint8_t> data) {
  static const auto table = make_table();
  std::uint16_t crc = 0xFFFF;
  for (std::uint8_t b : data) {
    crc = static_cast<std::uint16_t>((crc << 8) ^ table[((crc >> 8) ^ b) & 0xFF]);
  }
  return crc;
}

}  // namespace simopac
