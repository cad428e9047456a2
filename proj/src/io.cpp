#include "uwbcount/io.hpp"

#include <cstdio>

namespace uwbcount {

namespace {

void write_header(std::ostream& out, const char (&magic)[5], std::uint16_t version, std::uint32_t d0, std::uint32_t d1,
                  std::uint32_t d2) {
  ByteWriter w;
  w.put_magic(magic);
  w.put(version);
  w.put(d0);
  w.put(d1);
  w.put(d2);
  out.write(reinterpret_cast<const char*>(w.bytes().data()), static_cast<std::streamsize>(w.bytes().size()));
}

ContainerHeader read_header(std::istream& in, const char (&magic)[5]) {
  std::array<std::uint8_t, ContainerHeader::kBytes> raw{};
  in.read(reinterpret_cast<char*>(raw.data()), raw.size());
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) throw FormatError("container shorter than its header");
  ByteReader r(raw);
  r.expect_magic(magic);
  ContainerHeader h;
  std::copy_n(magic, 4, h.magic.begin());
  h.version = r.get<std::uint16_t>();
  for (auto& d : h.dims) d = r.get<std::uint32_t>();
  return h;
}

void read_trailer(std::istream& in, std::uint64_t items, std::vector<std::uint8_t>& labels,
                  std::vector<std::uint8_t>& scenarios) {
  labels.resize(items);
  scenarios.resize(items);
  in.read(reinterpret_cast<char*>(labels.data()), static_cast<std::streamsize>(items));
  in.read(reinterpret_cast<char*>(scenarios.data()), static_cast<std::streamsize>(items));
  if (!in || in.gcount() != static_cast<std::streamsize>(items)) throw FormatError("container label block truncated");
  for (auto s : scenarios)
    if (s > static_cast<std::uint8_t>(Scenario::Queue)) throw FormatError("container has an unknown scenario tag");
  in.peek();
  if (!in.eof()) throw FormatError("trailing bytes after container label block");
}

}  // namespace

RecordWriter::RecordWriter(const std::string& path, std::uint32_t records, std::uint32_t frames, std::uint32_t bins)
    : out_(path, std::ios::binary | std::ios::trunc), path_(path), expected_(records), frames_(frames), bins_(bins) {
  if (!out_) throw std::runtime_error("cannot open " + path + " for writing");
  write_header(out_, kRecordMagic, kRecordContainerVersion, records, frames, bins);
}

void RecordWriter::write(const Matrix& record, int label, Scenario scenario) {
  if (written_ >= expected_) throw std::logic_error("more records than declared");
  if (record.rows() != frames_ || record.cols() != bins_) throw DomainError("record shape does not match container");
  if (label < 0 || label > 255) throw DomainError("label does not fit in u8");
  scratch_.resize(record.size());
  for (std::size_t i = 0; i < record.size(); ++i) scratch_[i] = static_cast<float>(record.values()[i]);
  out_.write(reinterpret_cast<const char*>(scratch_.data()), static_cast<std::streamsize>(scratch_.size() * sizeof(float)));
  labels_.push_back(static_cast<std::uint8_t>(label));
  scenarios_.push_back(static_cast<std::uint8_t>(scenario));
  ++written_;
}

void RecordWriter::finish() {
  if (written_ != expected_) throw std::logic_error("fewer records than declared");
  out_.write(reinterpret_cast<const char*>(labels_.data()), static_cast<std::streamsize>(labels_.size()));
  out_.write(reinterpret_cast<const char*>(scenarios_.data()), static_cast<std::streamsize>(scenarios_.size()));
  out_.close();
  if (!out_) throw std::runtime_error("failed writing " + path_);
}

RecordReader::RecordReader(const std::string& path) : in_(path, std::ios::binary) {
  if (!in_) throw std::runtime_error("cannot open " + path);
  header_ = read_header(in_, kRecordMagic);
  if (header_.version != kRecordContainerVersion)
    throw FormatError("unsupported record container version " + std::to_string(header_.version));
  const std::uint64_t payload = header_.items() * header_.item_values() * sizeof(float);
  in_.seekg(static_cast<std::streamoff>(ContainerHeader::kBytes + payload));
  if (!in_) throw FormatError("record container payload truncated");
  read_trailer(in_, header_.items(), labels_, scenarios_);
  in_.clear();
}

Matrix RecordReader::read(std::size_t i) {
  if (i >= records()) throw std::out_of_range("record index");
  const std::uint64_t n = header_.item_values();
  in_.seekg(static_cast<std::streamoff>(ContainerHeader::kBytes + i * n * sizeof(float)));
  std::vector<float> buf(n);
  in_.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * sizeof(float)));
  if (!in_) throw FormatError("record container payload truncated");
  Matrix m(frames(), bins());
  std::copy(buf.begin(), buf.end(), m.values().begin());
  return m;
}

void FeatureTable::append(const FeatureVector& v, Scenario scenario) {
  if (v.values.size() != n_features) throw DomainError("feature vector length does not match table");
  if (!v.label || *v.label < 0 || *v.label > 255) throw DomainError("feature vector needs a u8 label");
  for (double x : v.values) values.push_back(static_cast<float>(x));
  labels.push_back(static_cast<std::uint8_t>(*v.label));
  scenarios.push_back(static_cast<std::uint8_t>(scenario));
}

void write_feature_table(const std::string& path, const FeatureTable& table) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_header(out, kFeatureMagic, table.layout_version, static_cast<std::uint32_t>(table.rows()), 1,
               static_cast<std::uint32_t>(table.n_features));
  out.write(reinterpret_cast<const char*>(table.values.data()),
            static_cast<std::streamsize>(table.values.size() * sizeof(float)));
  out.write(reinterpret_cast<const char*>(table.labels.data()), static_cast<std::streamsize>(table.labels.size()));
  out.write(reinterpret_cast<const char*>(table.scenarios.data()), static_cast<std::streamsize>(table.scenarios.size()));
  if (!out) throw std::runtime_error("failed writing " + path);
}

FeatureTable read_feature_table(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  const ContainerHeader h = read_header(in, kFeatureMagic);
  if (h.dims[1] != 1) throw FormatError("feature container must have one row per item");
  FeatureTable t;
  t.layout_version = h.version;
  t.n_features = h.dims[2];
  t.values.resize(h.items() * h.item_values());
  in.read(reinterpret_cast<char*>(t.values.data()), static_cast<std::streamsize>(t.values.size() * sizeof(float)));
  if (!in) throw FormatError("feature container payload truncated");
  read_trailer(in, h.items(), t.labels, t.scenarios);
  return t;
}

void write_feature_csv(const std::string& path, const FeatureTable& table, std::span<const int> bin_sizes,
                       std::size_t bins) {
  std::vector<std::string> names = feature_names(bin_sizes, bins);
  if (names.size() != table.n_features) {
    names.clear();
    for (std::size_t i = 0; i < table.n_features; ++i) names.push_back("f" + std::to_string(i));
  }
  std::string text = "scenario,label";
  for (const auto& n : names) text += "," + n;
  text += "\n";
  char buf[32];
  for (std::size_t r = 0; r < table.rows(); ++r) {
    text += to_string(static_cast<Scenario>(table.scenarios[r]));
    text += "," + std::to_string(table.labels[r]);
    for (std::size_t c = 0; c < table.n_features; ++c) {
      std::snprintf(buf, sizeof buf, ",%.9g", static_cast<double>(table.values[r * table.n_features + c]));
      text += buf;
    }
    text += "\n";
  }
  write_text(path, text);
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path);
}

}  // namespace uwbcount
