#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace kbo {

/// IDX parse failure with the byte offset at which the input stopped making sense.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset);
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Contents of an IDX file: big-endian header {0, 0, type, rank, dims[rank]} then the payload.
struct IdxTensor {
  std::uint8_t type_code = 0x08;
  std::vector<std::uint32_t> dims;
  std::vector<double> values;  // payload converted to double, row-major

  std::size_t element_count() const noexcept;
};

/// Size in bytes of one element of the given type code, or 0 if the code is not an IDX type.
std::size_t idx_element_size(std::uint8_t type_code) noexcept;

IdxTensor parse_idx(std::span<const std::uint8_t> bytes);
IdxTensor load_idx(const std::filesystem::path& path);

/// Serializes a tensor (values are cast to the element type).
std::vector<std::uint8_t> encode_idx(const IdxTensor& tensor);

}  // namespace kbo
