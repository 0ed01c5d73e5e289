#include "mmfusion/checkpoint.hpp"

#include <fstream>
#include <iterator>
#include <limits>

#include "binary_io.hpp"

namespace mmfusion {

std::string encode_checkpoint(const ParamStore& store) {
  std::string out = "FVW1";
  detail::put_u32(out, kCheckpointVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(store.size()));
  for (const Param* p : store) {
    if (p->name.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw std::invalid_argument("parameter name too long: " + p->name);
    }
    detail::put_u16(out, static_cast<std::uint16_t>(p->name.size()));
    out += p->name;
    detail::put_u32(out, static_cast<std::uint32_t>(p->value.rows()));
    detail::put_u32(out, static_cast<std::uint32_t>(p->value.cols()));
    for (double v : p->value.data()) detail::put_f64(out, v);
  }
  return out;
}

std::vector<NamedMatrix> decode_checkpoint(std::string_view bytes) {
  detail::Reader<FormatError> in(bytes, "checkpoint");
  if (in.take(4) != "FVW1") throw FormatError("checkpoint: bad magic (expected FVW1)");
  const std::uint32_t version = in.u32();
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  }
  const std::uint32_t count = in.u32();
  std::vector<NamedMatrix> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedMatrix nm;
    const std::uint16_t len = in.u16();
    nm.name = std::string(in.take(len));
    const std::uint32_t rows = in.u32();
    const std::uint32_t cols = in.u32();
    const std::uint64_t n = static_cast<std::uint64_t>(rows) * cols;
    if (n * 8 > in.remaining()) {
      throw FormatError("checkpoint: truncated data for '" + nm.name + "'");
    }
    std::vector<double> data(n);
    for (double& v : data) v = in.f64();
    nm.value = Matrix(rows, cols, std::move(data));
    out.push_back(std::move(nm));
  }
  if (!in.at_end()) throw FormatError("checkpoint: trailing bytes after last parameter");
  return out;
}

std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(f), {});
}

void write_file_bytes(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

void save_checkpoint(const std::filesystem::path& path, const ParamStore& store) {
  write_file_bytes(path, encode_checkpoint(store));
}

std::vector<NamedMatrix> read_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file_bytes(path));
}

void restore_params(const std::vector<NamedMatrix>& saved, ParamStore& store) {
  if (saved.size() != store.size()) {
    throw FormatError("checkpoint holds " + std::to_string(saved.size()) +
                      " parameters, model expects " + std::to_string(store.size()));
  }
  for (const NamedMatrix& nm : saved) {
    Param* p = store.find(nm.name);
    if (p == nullptr) throw FormatError("checkpoint parameter '" + nm.name + "' not in model");
    if (!p->value.same_shape(nm.value)) {
      throw ShapeError("checkpoint parameter '" + nm.name + "' has shape " +
                       nm.value.shape_str() + ", model expects " + p->value.shape_str());
    }
    p->value = nm.value;
    p->zero_grad();
  }
}

}  // namespace mmfusion
