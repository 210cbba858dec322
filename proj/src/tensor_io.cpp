#include "datslice/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace datslice {

namespace {

constexpr char kFmapMagic[4] = {'F', 'M', 'A', 'P'};
constexpr char kDatpMagic[4] = {'D', 'A', 'T', 'P'};
constexpr std::uint16_t kVersion = 1;
constexpr std::uint16_t kDtypeFloat64 = 1;

static_assert(std::endian::native == std::endian::little,
              "file writers assume a little-endian host");

template <typename T>
void write_le(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_le(std::istream& in, const char* what) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) {
    throw FormatError(std::string("truncated file while reading ") + what);
  }
  return value;
}

}  // namespace

void write_tensor(std::ostream& out, const Tensor& t) {
  out.write(kFmapMagic, 4);
  write_le<std::uint16_t>(out, kVersion);
  write_le<std::uint16_t>(out, kDtypeFloat64);
  write_le<std::uint8_t>(out, static_cast<std::uint8_t>(t.rank()));
  for (Eigen::Index d : t.dims()) write_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  out.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
  if (!out) {
    throw IoError("failed to write tensor payload");
  }
}

Tensor read_tensor(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kFmapMagic, 4) != 0) {
    throw FormatError("bad magic: expected FMAP");
  }
  const auto version = read_le<std::uint16_t>(in, "version");
  if (version != kVersion) {
    throw FormatError("unsupported FMAP version " + std::to_string(version));
  }
  const auto dtype = read_le<std::uint16_t>(in, "dtype");
  if (dtype != kDtypeFloat64) {
    throw FormatError("unsupported dtype code " + std::to_string(dtype));
  }
  const auto rank = read_le<std::uint8_t>(in, "rank");
  if (rank < 1 || rank > 4) {
    throw FormatError("rank " + std::to_string(rank) + " outside the supported 1..4");
  }
  std::vector<Eigen::Index> dims;
  Eigen::Index volume = 1;
  for (int i = 0; i < rank; ++i) {
    const auto e = read_le<std::uint32_t>(in, "extent");
    if (e < 1) {
      throw FormatError("extent must be >= 1");
    }
    dims.push_back(static_cast<Eigen::Index>(e));
    volume *= dims.back();
  }
  Eigen::ArrayXd data(volume);
  const std::streamsize want = static_cast<std::streamsize>(volume * sizeof(double));
  in.read(reinterpret_cast<char*>(data.data()), want);
  if (in.gcount() != want) {
    throw FormatError("truncated payload: expected " + std::to_string(want) + " bytes, got " +
                      std::to_string(in.gcount()));
  }
  return Tensor(std::move(dims), std::move(data));
}

void save_tensor(const std::string& path, const Tensor& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot open " + path + " for writing");
  }
  write_tensor(out, t);
}

Tensor load_tensor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + path);
  }
  return read_tensor(in);
}

namespace {

void write_section(std::ostream& out, const std::string& name, const Tensor& t) {
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  write_tensor(out, t);
}

}  // namespace

void save_params(const std::string& path, const DeformAttnParams& params) {
  params.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot open " + path + " for writing");
  }
  out.write(kDatpMagic, 4);
  write_le<std::uint16_t>(out, kVersion);

  Tensor meta({7});
  meta[0] = params.d_model;
  meta[1] = params.n_heads;
  meta[2] = params.n_ref_points;
  meta[3] = params.offset_scale;
  meta[4] = params.grid_stride;
  meta[5] = params.per_head_offsets ? 1.0 : 0.0;
  meta[6] = static_cast<double>(params.seed);  // exact for seeds below 2^53
  write_section(out, "meta", meta);

  write_section(out, "w_q", params.w_q);
  write_section(out, "b_q", params.b_q);
  write_section(out, "w_k", params.w_k);
  write_section(out, "b_k", params.b_k);
  write_section(out, "w_v", params.w_v);
  write_section(out, "b_v", params.b_v);
  write_section(out, "w_o", params.w_o);
  write_section(out, "b_o", params.b_o);
  write_section(out, "off_w1", params.off_w1);
  write_section(out, "off_b1", params.off_b1);
  write_section(out, "off_w2", params.off_w2);
  write_section(out, "off_b2", params.off_b2);
  if (!out) {
    throw IoError("failed while writing " + path);
  }
}

DeformAttnParams load_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + path);
  }
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kDatpMagic, 4) != 0) {
    throw FormatError("bad magic: expected DATP");
  }
  const auto version = read_le<std::uint16_t>(in, "version");
  if (version != kVersion) {
    throw FormatError("unsupported DATP version " + std::to_string(version));
  }

  std::map<std::string, Tensor> sections;
  while (true) {
    std::uint32_t name_len;
    in.read(reinterpret_cast<char*>(&name_len), sizeof(name_len));
    if (in.eof()) break;
    if (!in) {
      throw FormatError("truncated section header");
    }
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) {
      throw FormatError("truncated section name");
    }
    sections[name] = read_tensor(in);
  }

  auto take = [&sections](const std::string& name) -> Tensor {
    auto it = sections.find(name);
    if (it == sections.end()) {
      throw FormatError("missing section " + name);
    }
    return std::move(it->second);
  };

  const Tensor meta = take("meta");
  if (meta.rank() != 1 || meta.dim(0) < 7) {
    throw FormatError("malformed meta section");
  }
  DeformAttnParams p;
  p.d_model = static_cast<int>(meta[0]);
  p.n_heads = static_cast<int>(meta[1]);
  p.n_ref_points = static_cast<int>(meta[2]);
  p.offset_scale = meta[3];
  p.grid_stride = static_cast<int>(meta[4]);
  p.per_head_offsets = meta[5] != 0.0;
  p.seed = static_cast<std::uint64_t>(meta[6]);
  p.w_q = take("w_q");
  p.b_q = take("b_q");
  p.w_k = take("w_k");
  p.b_k = take("b_k");
  p.w_v = take("w_v");
  p.b_v = take("b_v");
  p.w_o = take("w_o");
  p.b_o = take("b_o");
  p.off_w1 = take("off_w1");
  p.off_b1 = take("off_b1");
  p.off_w2 = take("off_w2");
  p.off_b2 = take("off_b2");
  p.validate();
  return p;
}

}  // namespace datslice
