#include "kbo/idx.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace kbo {

ParseError::ParseError(const std::string& what, std::size_t offset)
    : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

std::size_t IdxTensor::element_count() const noexcept {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

std::size_t idx_element_size(std::uint8_t type_code) noexcept {
  switch (type_code) {
    case 0x08:
    case 0x09:
      return 1;
    case 0x0B:
      return 2;
    case 0x0C:
    case 0x0D:
      return 4;
    case 0x0E:
      return 8;
    default:
      return 0;
  }
}

namespace {

std::uint64_t read_be(const std::uint8_t* p, std::size_t width) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < width; ++i) v = (v << 8) | p[i];
  return v;
}

double decode(const std::uint8_t* p, std::uint8_t type) {
  switch (type) {
    case 0x08:
      return static_cast<double>(p[0]);
    case 0x09:
      return static_cast<double>(static_cast<std::int8_t>(p[0]));
    case 0x0B:
      return static_cast<double>(static_cast<std::int16_t>(read_be(p, 2)));
    case 0x0C:
      return static_cast<double>(static_cast<std::int32_t>(read_be(p, 4)));
    case 0x0D:
      return static_cast<double>(std::bit_cast<float>(static_cast<std::uint32_t>(read_be(p, 4))));
    default:
      return std::bit_cast<double>(read_be(p, 8));
  }
}

void write_be(std::vector<std::uint8_t>& out, std::uint64_t v, std::size_t width) {
  for (std::size_t i = width; i-- > 0;) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

}  // namespace

IdxTensor parse_idx(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw ParseError("truncated IDX header", bytes.size());
  if (bytes[0] != 0 || bytes[1] != 0) throw ParseError("bad IDX magic", 0);
  IdxTensor t;
  t.type_code = bytes[2];
  const std::size_t width = idx_element_size(t.type_code);
  if (width == 0) throw ParseError("unsupported IDX type code", 2);
  const std::size_t rank = bytes[3];
  std::size_t offset = 4;
  if (bytes.size() < offset + 4 * rank) throw ParseError("truncated IDX dimension list", bytes.size());
  for (std::size_t r = 0; r < rank; ++r, offset += 4) {
    t.dims.push_back(static_cast<std::uint32_t>(read_be(bytes.data() + offset, 4)));
  }
  const std::size_t count = t.element_count();
  if (bytes.size() - offset < count * width) throw ParseError("truncated IDX payload", bytes.size());
  t.values.resize(count);
  for (std::size_t i = 0; i < count; ++i, offset += width) t.values[i] = decode(bytes.data() + offset, t.type_code);
  return t;
}

IdxTensor load_idx(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open IDX file: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_idx(bytes);
}

std::vector<std::uint8_t> encode_idx(const IdxTensor& t) {
  const std::size_t width = idx_element_size(t.type_code);
  if (width == 0) throw std::invalid_argument("unsupported IDX type code");
  std::vector<std::uint8_t> out{0, 0, t.type_code, static_cast<std::uint8_t>(t.dims.size())};
  for (auto d : t.dims) write_be(out, d, 4);
  for (double v : t.values) {
    switch (t.type_code) {
      case 0x08:
      case 0x09:
        out.push_back(static_cast<std::uint8_t>(static_cast<std::int64_t>(v)));
        break;
      case 0x0B:
        write_be(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(v)), 2);
        break;
      case 0x0C:
        write_be(out, static_cast<std::uint32_t>(static_cast<std::int32_t>(v)), 4);
        break;
      case 0x0D:
        write_be(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)), 4);
        break;
      default:
        write_be(out, std::bit_cast<std::uint64_t>(v), 8);
    }
  }
  return out;
}

}  // namespace kbo
