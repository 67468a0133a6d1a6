#pragma once

#include <cstdint>
#include <span>

namespace simopac {

// CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection, no xorout.
// Check value: crc16_ccitt_false("123456789") == 0x29B1.
std::uint16_t crc16_ccitt_false(std::span<const std::uint8_t> data);

}  // namespace simopac
