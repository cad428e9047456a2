#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "uwbcount/common.hpp"
#include "uwbcount/features.hpp"
#include "uwbcount/radar_sim.hpp"

namespace uwbcount {

static_assert(std::endian::native == std::endian::little, "containers assume a little-endian host");

/// Appends little-endian scalars to a byte buffer.
class ByteWriter {
 public:
  template <class T>
  void put(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  void put_bytes(std::span<const std::uint8_t> b) { bytes_.insert(bytes_.end(), b.begin(), b.end()); }
  void put_magic(const char (&m)[5]) { bytes_.insert(bytes_.end(), m, m + 4); }

  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

/// Reads little-endian scalars; throws FormatError past the end.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <class T>
  T get() {
    static_assert(std::is_trivially_copyable_v<T>);
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  void expect_magic(const char (&m)[5]) {
    need(4);
    if (std::memcmp(bytes_.data() + pos_, m, 4) != 0) throw FormatError(std::string("bad magic, expected ") + m);
    pos_ += 4;
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw FormatError("unexpected end of data");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

inline constexpr char kRecordMagic[5] = "UWBR";
inline constexpr char kFeatureMagic[5] = "UWBF";
inline constexpr std::uint16_t kRecordContainerVersion = 1;

/// Fixed-size header shared by both containers: magic, u16 version, three
/// u32 dims. Payload (f32, row-major) follows, then one u8 label per item,
/// then one u8 scenario tag per item.
struct ContainerHeader {
  std::array<char, 4> magic{};
  std::uint16_t version = 0;
  std::uint32_t dims[3]{};

  std::uint64_t items() const { return dims[0]; }
  std::uint64_t item_values() const { return std::uint64_t{dims[1]} * dims[2]; }
  static constexpr std::size_t kBytes = 4 + 2 + 12;
};

/// Streams records to disk in order; labels and scenarios are written by finish().
class RecordWriter {
 public:
  RecordWriter(const std::string& path, std::uint32_t records, std::uint32_t frames, std::uint32_t bins);
  void write(const Matrix& record, int label, Scenario scenario);
  void finish();

 private:
  std::ofstream out_;
  std::string path_;
  std::uint32_t expected_, frames_, bins_;
  std::uint32_t written_ = 0;
  std::vector<std::uint8_t> labels_, scenarios_;
  std::vector<float> scratch_;
};

/// Random access over a record container.
class RecordReader {
 public:
  explicit RecordReader(const std::string& path);
  std::uint32_t records() const { return header_.dims[0]; }
  std::uint32_t frames() const { return header_.dims[1]; }
  std::uint32_t bins() const { return header_.dims[2]; }
  int label(std::size_t i) const { return labels_.at(i); }
  Scenario scenario(std::size_t i) const { return static_cast<Scenario>(scenarios_.at(i)); }
  Matrix read(std::size_t i);

 private:
  std::ifstream in_;
  ContainerHeader header_;
  std::vector<std::uint8_t> labels_, scenarios_;
};

/// In-memory feature table: one row per sample.
struct FeatureTable {
  std::uint16_t layout_version = kFeatureLayoutVersion;
  std::size_t n_features = kHybridFeatureCount;
  std::vector<float> values;  // rows x n_features
  std::vector<std::uint8_t> labels;
  std::vector<std::uint8_t> scenarios;

  std::size_t rows() const { return labels.size(); }
  void append(const FeatureVector& v, Scenario scenario);
};

void write_feature_table(const std::string& path, const FeatureTable& table);
FeatureTable read_feature_table(const std::string& path);
/// CSV mirror: header "scenario,label,<feature names>", one row per sample.
void write_feature_csv(const std::string& path, const FeatureTable& table, std::span<const int> bin_sizes = kDefaultBinSizes,
                       std::size_t bins = 1280);

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const std::uint8_t> bytes);
void write_text(const std::string& path, const std::string& text);

}  // namespace uwbcount
