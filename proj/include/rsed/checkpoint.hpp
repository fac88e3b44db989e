#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rsed/network.hpp"

namespace rsed {

// Minimal store-only ZIP container.
class ZipWriter {
 public:
  explicit ZipWriter(const std::string& path);
  void add(const std::string& name, const std::vector<std::uint8_t>& data);
  void finish();

 private:
  struct Entry {
    std::string name;
    std::uint32_t crc, size, offset;
  };
  std::string path_;
  std::vector<std::uint8_t> buf_;
  std::vector<Entry> entries_;
  bool finished_ = false;
};

class ZipReader {
 public:
  explicit ZipReader(const std::string& path);
  std::vector<std::string> names() const;
  bool contains(const std::string& name) const;
  std::vector<std::uint8_t> extract(const std::string& name) const;

 private:
  std::vector<std::uint8_t> buf_;
  std::map<std::string, std::pair<std::uint32_t, std::uint32_t>> entries_;  // offset, size
};

inline constexpr int kCheckpointVersion = 1;

// One uncompressed ZIP holding manifest.json plus one f64 BVTF blob per
// parameter tensor.
void save_checkpoint(const std::string& path, const DetectorParams& params);
DetectorParams load_checkpoint(const std::string& path);

}  // namespace rsed
