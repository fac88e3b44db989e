#include "rsed/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include "rsed/json_conv.hpp"
#include "rsed/tensor_io.hpp"

namespace rsed {

namespace {

std::uint32_t crc32(const std::uint8_t* data, size_t n) {
  static std::uint32_t table[256];
  static bool init = false;
  if (!init) {
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      table[i] = c;
    }
    init = true;
  }
  std::uint32_t c = 0xFFFFFFFFu;
  for (size_t i = 0; i < n; ++i) c = table[(c ^ data[i]) & 0xFF] ^ (c >> 8);
  return c ^ 0xFFFFFFFFu;
}

void put16(std::vector<std::uint8_t>& b, std::uint16_t v) {
  b.push_back(v & 0xFF);
  b.push_back(v >> 8);
}

void put32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back((v >> (8 * i)) & 0xFF);
}

std::uint16_t get16(const std::uint8_t* p) { return p[0] | p[1] << 8; }
std::uint32_t get32(const std::uint8_t* p) {
  return p[0] | p[1] << 8 | p[2] << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

}  // namespace

ZipWriter::ZipWriter(const std::string& path) : path_(path) {}

void ZipWriter::add(const std::string& name, const std::vector<std::uint8_t>& data) {
  Entry e;
  e.name = name;
  e.crc = crc32(data.data(), data.size());
  e.size = static_cast<std::uint32_t>(data.size());
  e.offset = static_cast<std::uint32_t>(buf_.size());
  put32(buf_, 0x04034b50);
  put16(buf_, 20);      // version needed
  put16(buf_, 0);       // flags
  put16(buf_, 0);       // method: store
  put16(buf_, 0);       // time
  put16(buf_, 0);       // date
  put32(buf_, e.crc);
  put32(buf_, e.size);  // compressed
  put32(buf_, e.size);  // uncompressed
  put16(buf_, static_cast<std::uint16_t>(name.size()));
  put16(buf_, 0);       // extra
  buf_.insert(buf_.end(), name.begin(), name.end());
  buf_.insert(buf_.end(), data.begin(), data.end());
  entries_.push_back(e);
}

void ZipWriter::finish() {
  if (finished_) return;
  const std::uint32_t central_off = static_cast<std::uint32_t>(buf_.size());
  for (const Entry& e : entries_) {
    put32(buf_, 0x02014b50);
    put16(buf_, 20);  // made by
    put16(buf_, 20);  // needed
    put16(buf_, 0);
    put16(buf_, 0);
    put16(buf_, 0);
    put16(buf_, 0);
    put32(buf_, e.crc);
    put32(buf_, e.size);
    put32(buf_, e.size);
    put16(buf_, static_cast<std::uint16_t>(e.name.size()));
    put16(buf_, 0);
    put16(buf_, 0);
    put16(buf_, 0);
    put16(buf_, 0);
    put32(buf_, 0);
    put32(buf_, e.offset);
    buf_.insert(buf_.end(), e.name.begin(), e.name.end());
  }
  const std::uint32_t central_size = static_cast<std::uint32_t>(buf_.size()) - central_off;
  put32(buf_, 0x06054b50);
  put16(buf_, 0);
  put16(buf_, 0);
  put16(buf_, static_cast<std::uint16_t>(entries_.size()));
  put16(buf_, static_cast<std::uint16_t>(entries_.size()));
  put32(buf_, central_size);
  put32(buf_, central_off);
  put16(buf_, 0);

  std::ofstream out(path_, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path_);
  out.write(reinterpret_cast<const char*>(buf_.data()), buf_.size());
  if (!out) throw std::runtime_error("short write: " + path_);
  finished_ = true;
}

ZipReader::ZipReader(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  buf_.assign((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  // locate the end-of-central-directory record
  if (buf_.size() < 22) throw std::runtime_error("unsupported format: not a zip archive");
  size_t eocd = std::string::npos;
  const size_t scan_from = buf_.size() > 65557 ? buf_.size() - 65557 : 0;
  for (size_t i = buf_.size() - 22; ; --i) {
    if (get32(buf_.data() + i) == 0x06054b50) {
      eocd = i;
      break;
    }
    if (i == scan_from) break;
  }
  if (eocd == std::string::npos) {
    throw std::runtime_error("unsupported format: not a zip archive");
  }
  const std::uint16_t n = get16(buf_.data() + eocd + 10);
  std::uint32_t off = get32(buf_.data() + eocd + 16);
  for (int i = 0; i < n; ++i) {
    if (off + 46 > buf_.size() || get32(buf_.data() + off) != 0x02014b50) {
      throw std::runtime_error("unsupported format: bad central directory");
    }
    const std::uint16_t method = get16(buf_.data() + off + 10);
    const std::uint32_t size = get32(buf_.data() + off + 24);
    const std::uint16_t name_len = get16(buf_.data() + off + 28);
    const std::uint16_t extra_len = get16(buf_.data() + off + 30);
    const std::uint16_t comment_len = get16(buf_.data() + off + 32);
    const std::uint32_t local_off = get32(buf_.data() + off + 42);
    if (method != 0) throw std::runtime_error("unsupported format: compressed zip entry");
    const std::string name(reinterpret_cast<const char*>(buf_.data() + off + 46), name_len);
    entries_[name] = {local_off, size};
    off += 46 + name_len + extra_len + comment_len;
  }
}

std::vector<std::string> ZipReader::names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : entries_) out.push_back(name);
  return out;
}

bool ZipReader::contains(const std::string& name) const { return entries_.count(name) > 0; }

std::vector<std::uint8_t> ZipReader::extract(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::runtime_error("missing zip entry: " + name);
  const auto [local_off, size] = it->second;
  if (local_off + 30 > buf_.size() || get32(buf_.data() + local_off) != 0x04034b50) {
    throw std::runtime_error("unsupported format: bad local header");
  }
  const std::uint16_t name_len = get16(buf_.data() + local_off + 26);
  const std::uint16_t extra_len = get16(buf_.data() + local_off + 28);
  const std::uint32_t crc = get32(buf_.data() + local_off + 14);
  const size_t start = local_off + 30 + name_len + extra_len;
  if (start + size > buf_.size()) {
    throw std::runtime_error("unsupported format: truncated zip entry");
  }
  std::vector<std::uint8_t> data(buf_.begin() + start, buf_.begin() + start + size);
  if (crc32(data.data(), data.size()) != crc) {
    throw std::runtime_error("unsupported format: CRC mismatch in " + name);
  }
  return data;
}

void save_checkpoint(const std::string& path, const DetectorParams& params) {
  nlohmann::json manifest = {
      {"format", "robust-sed-checkpoint"},
      {"format_version", kCheckpointVersion},
      {"formulation", formulation_name(params.formulation())},
      {"frontend", params.frontend},
      {"context", params.context},
      {"geometry", params.geometry},
  };
  ZipWriter zip(path);
  const std::string ms = manifest.dump(2);
  zip.add("manifest.json", std::vector<std::uint8_t>(ms.begin(), ms.end()));

  DetectorParams& mut = const_cast<DetectorParams&>(params);
  for (const NamedTensor& t : parameter_tensors(mut)) {
    TensorFile tf;
    tf.dtype = "f64";
    tf.shape = {static_cast<std::int64_t>(t.data->size())};
    tf.axes = {"value"};
    tf.f64 = *t.data;
    zip.add("tensors/" + t.name + ".bvtf", encode_tensor(tf));
  }
  zip.finish();
}

DetectorParams load_checkpoint(const std::string& path) {
  ZipReader zip(path);
  if (!zip.contains("manifest.json")) {
    throw std::runtime_error("unsupported format: missing manifest");
  }
  const auto mbytes = zip.extract("manifest.json");
  nlohmann::json manifest = nlohmann::json::parse(mbytes.begin(), mbytes.end());
  if (manifest.value("format", "") != "robust-sed-checkpoint" ||
      manifest.value("format_version", -1) != kCheckpointVersion) {
    throw std::runtime_error("unsupported format: not a checkpoint or wrong version");
  }

  DetectorParams p;
  manifest.at("geometry").get_to(p.geometry);
  manifest.at("frontend").get_to(p.frontend);
  manifest.at("context").get_to(p.context);
  const Formulation f = parse_formulation(manifest.at("formulation").get<std::string>());
  allocate_params(p.geometry, f, p.main, p.aux, p.merge);

  for (const NamedTensor& t : parameter_tensors(p)) {
    const std::string entry = "tensors/" + t.name + ".bvtf";
    if (!zip.contains(entry)) throw std::runtime_error("checkpoint missing tensor " + t.name);
    const auto bytes = zip.extract(entry);
    const TensorFile tf = decode_tensor(bytes.data(), bytes.size());
    if (tf.dtype != "f64" || tf.f64.size() != t.data->size()) {
      throw std::runtime_error("dimension mismatch in " + t.name + ": checkpoint has " +
                               std::to_string(tf.element_count()) + " values, geometry needs " +
                               std::to_string(t.data->size()));
    }
    *t.data = tf.f64;
  }
  return p;
}

}  // namespace rsed
