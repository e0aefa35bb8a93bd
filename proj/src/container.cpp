#include "odm/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace odm::container {

namespace {

constexpr std::size_t kMagicLen = 8;
constexpr std::uint64_t kMaxHeaderLen = 1ull << 30;

void require_little_endian() {
    if constexpr (std::endian::native != std::endian::little)
        throw std::runtime_error("container: little-endian host required");
}

}  // namespace

const Block& File::get(const std::string& name) const {
    for (const Block& b : blocks)
        if (b.name == name) return b;
    throw std::runtime_error("container: missing block '" + name + "'");
}

void write(const std::string& path, const std::string& magic, nlohmann::json meta,
           const std::vector<Block>& blocks) {
    require_little_endian();
    if (magic.size() != kMagicLen)
        throw std::invalid_argument("container: magic must be 8 bytes");

    nlohmann::json index = nlohmann::json::array();
    for (const Block& b : blocks) index.push_back({{"name", b.name}, {"bytes", b.bytes.size()}});
    meta["blocks"] = std::move(index);
    meta["endianness"] = "little";
    const std::string header = meta.dump();

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("container: cannot open '" + path + "' for writing");
    f.write(magic.data(), static_cast<std::streamsize>(kMagicLen));
    const std::uint64_t len = header.size();
    f.write(reinterpret_cast<const char*>(&len), sizeof(len));
    f.write(header.data(), static_cast<std::streamsize>(header.size()));
    for (const Block& b : blocks)
        if (!b.bytes.empty())
            f.write(reinterpret_cast<const char*>(b.bytes.data()),
                    static_cast<std::streamsize>(b.bytes.size()));
    f.flush();
    if (!f) throw std::runtime_error("container: write to '" + path + "' failed");
}

File read(const std::string& path, const std::string& magic) {
    require_little_endian();
    if (magic.size() != kMagicLen)
        throw std::invalid_argument("container: magic must be 8 bytes");

    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("container: cannot open '" + path + "'");

    char got[kMagicLen];
    if (!f.read(got, kMagicLen) || std::memcmp(got, magic.data(), kMagicLen) != 0)
        throw std::runtime_error("container: '" + path + "' has wrong or missing magic");

    std::uint64_t len = 0;
    if (!f.read(reinterpret_cast<char*>(&len), sizeof(len)) || len == 0 || len > kMaxHeaderLen)
        throw std::runtime_error("container: '" + path + "' has a malformed header length");

    std::string header(len, '\0');
    if (!f.read(header.data(), static_cast<std::streamsize>(len)))
        throw std::runtime_error("container: '" + path + "' is truncated inside the header");

    File out;
    try {
        out.meta = nlohmann::json::parse(header);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error("container: '" + path + "' has a malformed JSON header: " +
                                 e.what());
    }
    if (!out.meta.is_object() || !out.meta.contains("blocks") || !out.meta["blocks"].is_array())
        throw std::runtime_error("container: '" + path + "' header lacks a blocks index");
    if (out.meta.value("endianness", "") != "little")
        throw std::runtime_error("container: '" + path + "' is not little-endian");

    for (const auto& e : out.meta["blocks"]) {
        if (!e.is_object() || !e.contains("name") || !e.contains("bytes"))
            throw std::runtime_error("container: '" + path + "' has a malformed block entry");
        Block b;
        b.name = e["name"].get<std::string>();
        b.bytes.resize(e["bytes"].get<std::uint64_t>());
        if (!b.bytes.empty() &&
            !f.read(reinterpret_cast<char*>(b.bytes.data()),
                    static_cast<std::streamsize>(b.bytes.size())))
            throw std::runtime_error("container: '" + path + "' is truncated in block '" +
                                     b.name + "'");
        out.blocks.push_back(std::move(b));
    }
    if (f.peek() != std::ifstream::traits_type::eof())
        throw std::runtime_error("container: '" + path + "' has trailing bytes");
    return out;
}

std::vector<unsigned char> pack_f64(const std::vector<double>& v) {
    require_little_endian();
    std::vector<unsigned char> out(v.size() * sizeof(double));
    if (!v.empty()) std::memcpy(out.data(), v.data(), out.size());
    return out;
}

std::vector<double> unpack_f64(const std::vector<unsigned char>& b) {
    require_little_endian();
    if (b.size() % sizeof(double) != 0)
        throw std::runtime_error("container: f64 block size is not a multiple of 8");
    std::vector<double> out(b.size() / sizeof(double));
    if (!b.empty()) std::memcpy(out.data(), b.data(), b.size());
    return out;
}

std::vector<unsigned char> pack_u16(const std::vector<std::uint16_t>& v) {
    require_little_endian();
    std::vector<unsigned char> out(v.size() * sizeof(std::uint16_t));
    if (!v.empty()) std::memcpy(out.data(), v.data(), out.size());
    return out;
}

std::vector<std::uint16_t> unpack_u16(const std::vector<unsigned char>& b) {
    require_little_endian();
    if (b.size() % sizeof(std::uint16_t) != 0)
        throw std::runtime_error("container: u16 block size is not a multiple of 2");
    std::vector<std::uint16_t> out(b.size() / sizeof(std::uint16_t));
    if (!b.empty()) std::memcpy(out.data(), b.data(), b.size());
    return out;
}

}  // namespace odm::container
