#include <cmath>
#include <fstream>

#include "binary_io.hpp"
#include "scstory/encoder.hpp"

namespace scstory::encoder {

void write_checkpoint(std::ostream& out, const EncoderParams& params) {
  out.write("SCSE", 4);
  io::write_le<std::uint32_t>(out, kCheckpointVersion);
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.embed_dim));
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.hidden_dim));
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.n_heads));
  for (const Matrix* m : params.tensors())
    for (Eigen::Index i = 0; i < m->size(); ++i) io::write_f32(out, m->data()[i]);
}

void save_checkpoint(const std::filesystem::path& path, const EncoderParams& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::BadFile, "cannot open " + path.string() + " for writing");
  write_checkpoint(out, params);
  if (!out) throw Error(Errc::BadFile, "write failed: " + path.string());
}

EncoderParams read_checkpoint(std::istream& in) {
  io::expect_magic(in, "SCSE");
  const auto version = io::read_le<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion)
    throw Error(Errc::UnsupportedVersion, "checkpoint version " + std::to_string(version));
  const auto h_e = io::read_le<std::uint32_t>(in, "h_e");
  const auto h_c = io::read_le<std::uint32_t>(in, "h_c");
  const auto n = io::read_le<std::uint32_t>(in, "n_heads");
  constexpr std::uint32_t kMaxDim = 1u << 16;
  if (h_e > kMaxDim || h_c > kMaxDim || n > kMaxDim)
    throw Error(Errc::BadDims, "implausible checkpoint dimensions");
  // Shapes come from init_params; the seed is irrelevant since every value is overwritten.
  EncoderParams params = init_params(0, static_cast<int>(h_e), static_cast<int>(h_c), static_cast<int>(n));
  for (Matrix* m : params.tensors()) {
    for (Eigen::Index i = 0; i < m->size(); ++i) {
      const float v = io::read_f32(in, "tensor data");
      if (!std::isfinite(v)) throw Error(Errc::NonFiniteValue, "checkpoint tensor value");
      m->data()[i] = v;
    }
  }
  return params;
}

EncoderParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::BadFile, "cannot open " + path.string());
  return read_checkpoint(in);
}

}  // namespace scstory::encoder
