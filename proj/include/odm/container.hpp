#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace odm::container {

/// On-disk layout: 8-byte magic | u64 little-endian header length | JSON
/// header | raw block bytes back to back. The writer appends a "blocks"
/// array (name + byte count, in order) and "endianness" to the header; the
/// reader validates magic, header shape, block sizes, and absence of
/// trailing bytes.
struct Block {
    std::string name;
    std::vector<unsigned char> bytes;
};

struct File {
    nlohmann::json meta;
    std::vector<Block> blocks;

    const Block& get(const std::string& name) const;  // throws if absent
};

void write(const std::string& path, const std::string& magic, nlohmann::json meta,
           const std::vector<Block>& blocks);

File read(const std::string& path, const std::string& magic);

std::vector<unsigned char> pack_f64(const std::vector<double>& v);
std::vector<double> unpack_f64(const std::vector<unsigned char>& b);
std::vector<unsigned char> pack_u16(const std::vector<std::uint16_t>& v);
std::vector<std::uint16_t> unpack_u16(const std::vector<unsigned char>& b);

}  // namespace odm::container
