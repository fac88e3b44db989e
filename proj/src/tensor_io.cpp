#include "rsed/tensor_io.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace rsed {

namespace {
constexpr char kMagic[4] = {'B', 'V', 'T', 'F'};

[[noreturn]] void bad_format(const std::string& why) {
  throw std::runtime_error("unsupported format: " + why);
}
}  // namespace

std::int64_t TensorFile::element_count() const {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  return shape.empty() ? 0 : n;
}

std::vector<std::uint8_t> encode_tensor(const TensorFile& t) {
  nlohmann::json header = {
      {"dtype", t.dtype}, {"shape", t.shape}, {"axes", t.axes}, {"metadata", t.metadata}};
  const std::string hs = header.dump();
  const std::int64_t n = t.element_count();
  const size_t elem = t.dtype == "f64" ? 8 : 4;
  if (t.dtype == "f32") {
    if (static_cast<std::int64_t>(t.f32.size()) != n) bad_format("payload/shape mismatch");
  } else if (t.dtype == "f64") {
    if (static_cast<std::int64_t>(t.f64.size()) != n) bad_format("payload/shape mismatch");
  } else {
    bad_format("dtype " + t.dtype);
  }

  std::vector<std::uint8_t> out(8 + hs.size() + n * elem);
  std::memcpy(out.data(), kMagic, 4);
  const std::uint32_t hlen = static_cast<std::uint32_t>(hs.size());
  out[4] = hlen & 0xFF;
  out[5] = (hlen >> 8) & 0xFF;
  out[6] = (hlen >> 16) & 0xFF;
  out[7] = (hlen >> 24) & 0xFF;
  std::memcpy(out.data() + 8, hs.data(), hs.size());
  if (t.dtype == "f32") {
    std::memcpy(out.data() + 8 + hs.size(), t.f32.data(), n * 4);
  } else {
    std::memcpy(out.data() + 8 + hs.size(), t.f64.data(), n * 8);
  }
  return out;
}

TensorFile decode_tensor(const std::uint8_t* data, size_t size) {
  if (size < 8 || std::memcmp(data, kMagic, 4) != 0) bad_format("bad magic");
  const std::uint32_t hlen = data[4] | data[5] << 8 | data[6] << 16 |
                             static_cast<std::uint32_t>(data[7]) << 24;
  if (8 + static_cast<size_t>(hlen) > size) bad_format("truncated header");
  TensorFile t;
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(data + 8, data + 8 + hlen);
    t.dtype = header.at("dtype").get<std::string>();
    t.shape = header.at("shape").get<std::vector<std::int64_t>>();
    t.axes = header.value("axes", std::vector<std::string>{});
    t.metadata = header.value("metadata", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    bad_format(std::string("header: ") + e.what());
  }
  const std::int64_t n = t.element_count();
  const size_t elem = t.dtype == "f64" ? 8 : t.dtype == "f32" ? 4 : 0;
  if (elem == 0) bad_format("dtype " + t.dtype);
  if (8 + hlen + n * elem != size) bad_format("payload length mismatch");
  if (t.dtype == "f32") {
    t.f32.resize(n);
    std::memcpy(t.f32.data(), data + 8 + hlen, n * 4);
  } else {
    t.f64.resize(n);
    std::memcpy(t.f64.data(), data + 8 + hlen, n * 8);
  }
  return t;
}

void write_tensor(const std::string& path, const TensorFile& t) {
  const std::vector<std::uint8_t> buf = encode_tensor(t);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(reinterpret_cast<const char*>(buf.data()), buf.size());
  if (!out) throw std::runtime_error("short write: " + path);
}

TensorFile read_tensor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
  return decode_tensor(buf.data(), buf.size());
}

TensorFile to_tensor(const TimeFrequencyMatrix& m) {
  TensorFile t;
  t.shape = {m.n_frames, m.n_bands};
  t.axes = {"frame", "band"};
  t.f32 = m.values;
  t.metadata = {{"kind", tf_kind_name(m.kind)},
                {"frame_rate", m.frame_rate},
                {"band_edges_hz", m.band_edges},
                {"mel_scale", "htk"},
                {"mel_norm", "slaney"}};
  return t;
}

TimeFrequencyMatrix tf_matrix_from_tensor(const TensorFile& t) {
  if (t.dtype != "f32" || t.shape.size() != 2) bad_format("not a feature matrix");
  TimeFrequencyMatrix m;
  m.n_frames = static_cast<int>(t.shape[0]);
  m.n_bands = static_cast<int>(t.shape[1]);
  m.values = t.f32;
  m.kind = parse_tf_kind(t.metadata.value("kind", "energy"));
  m.frame_rate = t.metadata.value("frame_rate", 0.0);
  m.band_edges = t.metadata.value("band_edges_hz", std::vector<double>{});
  return m;
}

TensorFile to_tensor(const ContextTensor& c) {
  TensorFile t;
  t.shape = {c.n_slices, c.n_quantiles, c.n_bands};
  t.axes = {"slice", "quantile", "band"};
  t.f32 = c.values;
  t.metadata = {{"quantile_levels", c.quantile_levels},
                {"slice_times", c.slice_times},
                {"window_seconds", c.window_seconds},
                {"period_seconds", c.period_seconds}};
  return t;
}

ContextTensor context_from_tensor(const TensorFile& t) {
  if (t.dtype != "f32" || t.shape.size() != 3) bad_format("not a context tensor");
  ContextTensor c;
  c.n_slices = static_cast<int>(t.shape[0]);
  c.n_quantiles = static_cast<int>(t.shape[1]);
  c.n_bands = static_cast<int>(t.shape[2]);
  c.values = t.f32;
  c.quantile_levels = t.metadata.value("quantile_levels", std::vector<double>{});
  c.slice_times = t.metadata.value("slice_times", std::vector<double>{});
  c.window_seconds = t.metadata.value("window_seconds", 0.0);
  c.period_seconds = t.metadata.value("period_seconds", 0.0);
  return c;
}

}  // namespace rsed
