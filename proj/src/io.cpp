// SPDX-License-Identifier: Apache-2.0
#include "compstyle/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <type_traits>

#include "compstyle/error.hpp"

COMPSTYLE_NAMESPACE_BEGIN

namespace {

template <class U>
void put_le(std::vector<std::uint8_t>& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
}

template <class U>
U get_le(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  if (pos + sizeof(U) > bytes.size()) throw FormatError("CSTN: truncated file");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(bytes[pos + i]) << (8 * i));
  pos += sizeof(U);
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  if (t.rank() > 255) throw FormatError("CSTN: rank above 255");
  std::vector<std::uint8_t> out{'C', 'S', 'T', 'N', kCstnVersion,
                                static_cast<std::uint8_t>(kRealIsDouble ? DType::float64 : DType::float32),
                                static_cast<std::uint8_t>(t.rank())};
  for (auto d : t.shape()) {
    if (d < 0 || d > 0xFFFFFFFFll) throw FormatError("CSTN: dimension out of u32 range");
    put_le(out, static_cast<std::uint32_t>(d));
  }
  out.reserve(out.size() + t.data().size() * sizeof(Real));
  using Bits = std::conditional_t<kRealIsDouble, std::uint64_t, std::uint32_t>;
  for (Real v : t.data()) put_le(out, std::bit_cast<Bits>(v));
  return out;
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 7 || bytes[0] != 'C' || bytes[1] != 'S' || bytes[2] != 'T' || bytes[3] != 'N')
    throw FormatError("CSTN: bad magic");
  if (bytes[4] != kCstnVersion) throw FormatError("CSTN: unsupported version " + std::to_string(bytes[4]));
  const auto dtype = bytes[5];
  if (dtype > 1) throw FormatError("CSTN: unsupported dtype " + std::to_string(dtype));
  const std::size_t rank = bytes[6];
  std::size_t pos = 7;
  Shape shape(rank);
  for (auto& d : shape) d = get_le<std::uint32_t>(bytes, pos);
  const auto count = static_cast<std::size_t>(numel(shape));
  const std::size_t width = dtype == 0 ? 4 : 8;
  if (bytes.size() - pos != count * width)
    throw FormatError("CSTN: payload holds " + std::to_string(bytes.size() - pos) + " bytes, expected " +
                      std::to_string(count * width));
  std::vector<Real> values(count);
  for (auto& v : values) {
    if (dtype == 0)
      v = static_cast<Real>(std::bit_cast<float>(get_le<std::uint32_t>(bytes, pos)));
    else
      v = static_cast<Real>(std::bit_cast<double>(get_le<std::uint64_t>(bytes, pos)));
  }
  return Tensor::from(std::move(shape), std::move(values));
}

void write_tensor(std::ostream& os, const Tensor& t) {
  const auto bytes = encode_tensor(t);
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw FormatError("CSTN: write failed");
}

Tensor read_tensor(std::istream& is) {
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return decode_tensor(bytes);
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string());
  return {(std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>()};
}

void save_tensor(const std::filesystem::path& path, const Tensor& t) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot create " + path.string());
  write_tensor(os, t);
}

Tensor load_tensor(const std::filesystem::path& path) { return decode_tensor(read_file_bytes(path)); }

Tensor labels_to_tensor(const IntTensor& labels) {
  std::vector<Real> values(labels.data.begin(), labels.data.end());
  return Tensor::from(labels.shape, std::move(values));
}

IntTensor tensor_to_labels(const Tensor& t) {
  IntTensor out = IntTensor::zeros(t.shape());
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const Real v = t.data()[i];
    if (v != std::round(v)) throw FormatError("label tensor holds a non-integral value");
    out.data[i] = static_cast<std::int32_t>(v);
  }
  return out;
}

void save_pgm(const std::filesystem::path& path, const Tensor& image, double lo, double hi) {
  std::int64_t h = 0, w = 0;
  if (image.rank() == 2) {
    h = image.dim(0);
    w = image.dim(1);
  } else if (image.rank() == 3 && image.dim(0) == 1) {
    h = image.dim(1);
    w = image.dim(2);
  } else {
    throw DimensionError("save_pgm needs [H,W] or [1,H,W], got " + shape_string(image.shape()));
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot create " + path.string());
  os << "P5\n" << w << ' ' << h << "\n255\n";
  const double span = hi > lo ? hi - lo : 1.0;
  for (Real v : image.data()) {
    const double u = std::clamp((static_cast<double>(v) - lo) / span, 0.0, 1.0);
    os.put(static_cast<char>(static_cast<unsigned char>(std::lround(u * 255.0))));
  }
}

COMPSTYLE_NAMESPACE_END
