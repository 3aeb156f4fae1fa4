#include "protoexplain/tensor_store.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstring>
#include <functional>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

namespace protoexplain {

static_assert(std::endian::native == std::endian::little,
              "NPY payloads are read and written without byte swapping");

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr char kMagic[] = "\x93NUMPY";
constexpr std::size_t kMagicLen = 6;
constexpr std::size_t kArrayAlign = 64;
constexpr std::size_t kGrowthAxisMaxDigits = 21;

std::size_t element_count(const std::vector<std::int64_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         [](std::size_t acc, std::int64_t d) {
                           return acc * static_cast<std::size_t>(d);
                         });
}

std::string shape_repr(const std::vector<std::int64_t>& shape) {
  std::string out = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out += ", ";
    out += std::to_string(shape[i]);
  }
  if (shape.size() == 1) out += ",";
  out += ")";
  return out;
}

void validate_shape(const std::vector<std::int64_t>& shape,
                    const std::string& origin) {
  if (shape.empty()) {
    fail(ErrorKind::Validation, origin + ": tensor rank must be at least 1");
  }
  for (auto d : shape) {
    if (d <= 0) {
      fail(ErrorKind::Validation,
           origin + ": tensor extents must be positive, got " + shape_repr(shape));
    }
  }
}

// Minimal reader for the Python dict literal inside an NPY header.
class HeaderParser {
 public:
  HeaderParser(std::string_view text, std::string origin)
      : text_(text), origin_(std::move(origin)) {}

  NpyHeader parse() {
    std::optional<std::string> descr;
    std::optional<bool> fortran;
    std::optional<std::vector<std::int64_t>> shape;

    skip_ws();
    expect('{');
    while (true) {
      skip_ws();
      if (peek() == '}') {
        ++pos_;
        break;
      }
      const std::string key = parse_string();
      skip_ws();
      expect(':');
      skip_ws();
      if (key == "descr") {
        descr = parse_string();
      } else if (key == "fortran_order") {
        fortran = parse_bool();
      } else if (key == "shape") {
        shape = parse_tuple();
      } else {
        bad("unexpected header key '" + key + "'");
      }
      skip_ws();
      if (peek() == ',') {
        ++pos_;
      } else if (peek() != '}') {
        bad("expected ',' or '}'");
      }
    }
    for (; pos_ < text_.size(); ++pos_) {
      if (text_[pos_] != ' ' && text_[pos_] != '\n') bad("trailing garbage");
    }
    if (!descr || !fortran || !shape) bad("header lacks descr, fortran_order or shape");

    NpyHeader header;
    if (*descr == "<f4") {
      header.dtype = DType::F32;
    } else if (*descr == "<i8") {
      header.dtype = DType::I64;
    } else if (looks_like_descr(*descr)) {
      fail(ErrorKind::Unsupported,
           origin_ + ": dtype '" + *descr + "' is not supported (need <f4 or <i8)");
    } else {
      bad("malformed descr '" + *descr + "'");
    }
    if (*fortran) {
      fail(ErrorKind::Unsupported, origin_ + ": Fortran-order arrays are not supported");
    }
    header.shape = std::move(*shape);
    return header;
  }

 private:
  static bool looks_like_descr(const std::string& d) {
    if (d.size() < 3) return false;
    if (std::string_view("<>|=").find(d[0]) == std::string_view::npos) return false;
    if (!std::isalpha(static_cast<unsigned char>(d[1]))) return false;
    return std::all_of(d.begin() + 2, d.end(),
                       [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
  }

  [[noreturn]] void bad(const std::string& msg) const {
    fail(ErrorKind::Format, origin_ + ": malformed NPY header: " + msg);
  }

  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

  void skip_ws() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\n')) ++pos_;
  }

  void expect(char c) {
    if (peek() != c) bad(std::string("expected '") + c + "'");
    ++pos_;
  }

  std::string parse_string() {
    const char quote = peek();
    if (quote != '\'' && quote != '"') bad("expected a quoted string");
    ++pos_;
    const auto end = text_.find(quote, pos_);
    if (end == std::string_view::npos) bad("unterminated string");
    std::string out(text_.substr(pos_, end - pos_));
    pos_ = end + 1;
    return out;
  }

  bool parse_bool() {
    if (text_.substr(pos_, 4) == "True") {
      pos_ += 4;
      return true;
    }
    if (text_.substr(pos_, 5) == "False") {
      pos_ += 5;
      return false;
    }
    bad("expected True or False");
  }

  std::vector<std::int64_t> parse_tuple() {
    expect('(');
    std::vector<std::int64_t> out;
    while (true) {
      skip_ws();
      if (peek() == ')') {
        ++pos_;
        return out;
      }
      if (!std::isdigit(static_cast<unsigned char>(peek()))) bad("expected a shape extent");
      std::int64_t v = 0;
      while (std::isdigit(static_cast<unsigned char>(peek()))) {
        v = v * 10 + (text_[pos_] - '0');
        if (v > (std::int64_t{1} << 48)) bad("shape extent out of range");
        ++pos_;
      }
      out.push_back(v);
      skip_ws();
      if (peek() == ',') {
        ++pos_;
      } else if (peek() != ')') {
        bad("expected ',' or ')' in shape");
      }
    }
  }

  std::string_view text_;
  std::string origin_;
  std::size_t pos_ = 0;
};

std::string read_file_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

const char* to_string(DType dtype) { return dtype == DType::F32 ? "f32" : "i64"; }

TensorBlob::TensorBlob(std::vector<std::int64_t> shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {}

TensorBlob::TensorBlob(std::vector<std::int64_t> shape,
                       std::vector<std::int64_t> data)
    : shape_(std::move(shape)), data_(std::move(data)) {}

std::size_t TensorBlob::size() const noexcept {
  return std::visit([](const auto& v) { return v.size(); }, data_);
}

const std::vector<float>& TensorBlob::f32() const {
  if (dtype() != DType::F32) fail(ErrorKind::Validation, "tensor is i64, expected f32");
  return std::get<std::vector<float>>(data_);
}
const std::vector<std::int64_t>& TensorBlob::i64() const {
  if (dtype() != DType::I64) fail(ErrorKind::Validation, "tensor is f32, expected i64");
  return std::get<std::vector<std::int64_t>>(data_);
}
std::vector<float>& TensorBlob::f32() {
  if (dtype() != DType::F32) fail(ErrorKind::Validation, "tensor is i64, expected f32");
  return std::get<std::vector<float>>(data_);
}
std::vector<std::int64_t>& TensorBlob::i64() {
  if (dtype() != DType::I64) fail(ErrorKind::Validation, "tensor is f32, expected i64");
  return std::get<std::vector<std::int64_t>>(data_);
}

const void* TensorBlob::bytes() const noexcept {
  return std::visit([](const auto& v) -> const void* { return v.data(); }, data_);
}

void TensorBlob::validate() const {
  validate_shape(shape_, "tensor");
  if (element_count(shape_) != size()) {
    fail(ErrorKind::Validation, "tensor shape " + shape_repr(shape_) + " holds " +
                                    std::to_string(element_count(shape_)) +
                                    " elements but data has " + std::to_string(size()));
  }
}

bool bitwise_equal(const TensorBlob& a, const TensorBlob& b) {
  if (a.dtype() != b.dtype() || a.shape_ != b.shape_ || a.size() != b.size()) {
    return false;
  }
  return std::memcmp(a.bytes(), b.bytes(), a.size() * a.element_bytes()) == 0;
}

std::string npy_header_bytes(DType dtype, const std::vector<std::int64_t>& shape) {
  std::string dict = std::string("{'descr': '") + (dtype == DType::F32 ? "<f4" : "<i8") +
                     "', 'fortran_order': False, 'shape': " + shape_repr(shape) + ", }";
  if (!shape.empty()) {
    dict.append(kGrowthAxisMaxDigits - std::to_string(shape.front()).size(), ' ');
  }
  const std::size_t prefix = kMagicLen + 2 + 2;
  const std::size_t hlen = dict.size() + 1;
  const std::size_t pad = kArrayAlign - ((prefix + hlen) % kArrayAlign);
  dict.append(pad, ' ');
  dict.push_back('\n');
  if (dict.size() > 0xFFFF) fail(ErrorKind::Validation, "NPY header too long for v1.0");

  std::string out(kMagic, kMagicLen);
  out.push_back('\x01');
  out.push_back('\x00');
  out.push_back(static_cast<char>(dict.size() & 0xFF));
  out.push_back(static_cast<char>((dict.size() >> 8) & 0xFF));
  out += dict;
  return out;
}

NpyHeader read_npy_header(std::istream& in, const std::string& origin) {
  char preamble[10];
  if (!in.read(preamble, sizeof preamble)) {
    fail(ErrorKind::Format, origin + ": file too short for an NPY header");
  }
  if (std::memcmp(preamble, kMagic, kMagicLen) != 0) {
    fail(ErrorKind::Format, origin + ": missing NPY magic string");
  }
  if (preamble[6] != 1 || preamble[7] != 0) {
    fail(ErrorKind::Unsupported, origin + ": only NPY format version 1.0 is supported");
  }
  const std::size_t hlen = static_cast<unsigned char>(preamble[8]) |
                           (static_cast<std::size_t>(static_cast<unsigned char>(preamble[9])) << 8);
  std::string text(hlen, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(hlen))) {
    fail(ErrorKind::Format, origin + ": truncated NPY header");
  }
  NpyHeader header = HeaderParser(text, origin).parse();
  validate_shape(header.shape, origin);
  header.data_offset = sizeof preamble + hlen;
  return header;
}

TensorBlob read_tensor(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  const NpyHeader header = read_npy_header(in, path.string());
  const std::size_t count = element_count(header.shape);

  auto read_payload = [&](auto& values) {
    using T = typename std::decay_t<decltype(values)>::value_type;
    values.resize(count);
    const auto bytes = static_cast<std::streamsize>(count * sizeof(T));
    if (!in.read(reinterpret_cast<char*>(values.data()), bytes)) {
      fail(ErrorKind::Format, path.string() + ": payload shorter than shape " +
                                  shape_repr(header.shape));
    }
    if (in.peek() != std::ifstream::traits_type::eof()) {
      fail(ErrorKind::Format, path.string() + ": trailing bytes after payload");
    }
  };

  if (header.dtype == DType::F32) {
    std::vector<float> values;
    read_payload(values);
    return TensorBlob(header.shape, std::move(values));
  }
  std::vector<std::int64_t> values;
  read_payload(values);
  return TensorBlob(header.shape, std::move(values));
}

void write_tensor(const TensorBlob& blob, const fs::path& path) {
  blob.validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  const std::string header = npy_header_bytes(blob.dtype(), blob.shape());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(static_cast<const char*>(blob.bytes()),
            static_cast<std::streamsize>(blob.size() * blob.element_bytes()));
  if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
}

// ---------------------------------------------------------------------------

TensorFile::TensorFile(fs::path path) : path_(std::move(path)) {
  in_.open(path_, std::ios::binary);
  if (!in_) fail(ErrorKind::Io, "cannot open " + path_.string());
  header_ = read_npy_header(in_, path_.string());
  const auto expected = header_.data_offset +
                        element_count(header_.shape) * (header_.dtype == DType::F32 ? 4 : 8);
  std::error_code ec;
  const auto actual = fs::file_size(path_, ec);
  if (ec || actual != expected) {
    fail(ErrorKind::Format, path_.string() + ": payload size does not match shape " +
                                shape_repr(header_.shape));
  }
}

std::size_t TensorFile::slice_size() const noexcept {
  return element_count(header_.shape) / static_cast<std::size_t>(header_.shape.front());
}

void TensorFile::seek_slice(std::int64_t index, std::size_t element_bytes) {
  if (index < 0 || index >= leading()) {
    fail(ErrorKind::Validation, path_.string() + ": slice index " + std::to_string(index) +
                                    " out of range");
  }
  in_.clear();
  in_.seekg(static_cast<std::streamoff>(header_.data_offset +
                                        static_cast<std::size_t>(index) * slice_size() * element_bytes));
}

std::vector<float> TensorFile::read_f32_slice(std::int64_t index) {
  if (header_.dtype != DType::F32) fail(ErrorKind::Validation, path_.string() + ": expected f32");
  seek_slice(index, sizeof(float));
  std::vector<float> out(slice_size());
  if (!in_.read(reinterpret_cast<char*>(out.data()),
                static_cast<std::streamsize>(out.size() * sizeof(float)))) {
    fail(ErrorKind::Io, path_.string() + ": short read");
  }
  return out;
}

std::vector<std::int64_t> TensorFile::read_i64_slice(std::int64_t index) {
  if (header_.dtype != DType::I64) fail(ErrorKind::Validation, path_.string() + ": expected i64");
  seek_slice(index, sizeof(std::int64_t));
  std::vector<std::int64_t> out(slice_size());
  if (!in_.read(reinterpret_cast<char*>(out.data()),
                static_cast<std::streamsize>(out.size() * sizeof(std::int64_t)))) {
    fail(ErrorKind::Io, path_.string() + ": short read");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Manifest

const char* to_string(Split split) { return split == Split::Train ? "train" : "test"; }

SplitFilter parse_split_filter(const std::string& text) {
  if (text == "train") return SplitFilter::Train;
  if (text == "test") return SplitFilter::Test;
  if (text == "all") return SplitFilter::All;
  fail(ErrorKind::Config, "unknown split '" + text + "' (expected train, test or all)");
}

const BlockSpec& DatasetManifest::block(int id) const {
  for (const auto& b : blocks) {
    if (b.id == id) return b;
  }
  fail(ErrorKind::Config, "manifest has no block " + std::to_string(id));
}

bool DatasetManifest::has_block(int id) const {
  return std::any_of(blocks.begin(), blocks.end(), [&](const BlockSpec& b) { return b.id == id; });
}

std::vector<int> DatasetManifest::block_ids_from(int depth_from) const {
  if (!has_block(depth_from)) {
    fail(ErrorKind::Config, "depth " + std::to_string(depth_from) +
                                " is not a block of manifest " + source.string());
  }
  std::vector<int> ids;
  for (const auto& b : blocks) {
    if (b.id >= depth_from) ids.push_back(b.id);
  }
  return ids;
}

std::vector<std::int64_t> DatasetManifest::sample_ids(SplitFilter filter) const {
  std::vector<std::int64_t> ids;
  for (std::int64_t i = 0; i < num_samples; ++i) {
    const Split s = split_values[static_cast<std::size_t>(i)];
    if (filter == SplitFilter::All || (filter == SplitFilter::Train && s == Split::Train) ||
        (filter == SplitFilter::Test && s == Split::Test)) {
      ids.push_back(i);
    }
  }
  return ids;
}

namespace {

template <typename T>
T required(const json& doc, const char* key, const fs::path& origin) {
  if (!doc.contains(key)) {
    fail(ErrorKind::Validation, origin.string() + ": manifest lacks key \"" + key + "\"");
  }
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorKind::Validation, origin.string() + ": manifest key \"" + key + "\" has the wrong type");
  }
}

NpyHeader header_of(const fs::path& path, const char* role) {
  if (!fs::exists(path)) {
    fail(ErrorKind::Validation, std::string(role) + " file does not exist: " + path.string());
  }
  return TensorFile(path).header();
}

void expect_shape(const fs::path& path, const NpyHeader& header, DType dtype,
                  const std::vector<std::int64_t>& shape, const char* role) {
  if (header.dtype != dtype) {
    fail(ErrorKind::Validation, std::string(role) + " " + path.string() + " must be " +
                                    to_string(dtype) + ", found " + to_string(header.dtype));
  }
  if (header.shape != shape) {
    fail(ErrorKind::Validation, std::string(role) + " " + path.string() + " has shape " +
                                    shape_repr(header.shape) + ", manifest implies " +
                                    shape_repr(shape));
  }
}

}  // namespace

DatasetManifest load_manifest(const fs::path& path) {
  json doc;
  try {
    doc = json::parse(read_file_text(path));
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Format, path.string() + ": invalid JSON: " + e.what());
  }
  if (!doc.is_object()) fail(ErrorKind::Format, path.string() + ": manifest must be a JSON object");

  const fs::path base = path.parent_path();
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };

  DatasetManifest m;
  m.source = path;
  m.dataset_name = required<std::string>(doc, "dataset", path);
  m.num_classes = required<std::int64_t>(doc, "num_classes", path);
  m.embedding_dim = required<std::int64_t>(doc, "embedding_dim", path);
  m.embeddings = resolve(required<std::string>(doc, "embeddings", path));
  m.classifier = resolve(required<std::string>(doc, "classifier", path));
  m.labels = resolve(required<std::string>(doc, "labels", path));
  m.split_path = resolve(required<std::string>(doc, "split", path));
  if (doc.contains("bias")) m.bias_handling = required<std::string>(doc, "bias", path);

  if (m.num_classes < 1) fail(ErrorKind::Validation, path.string() + ": num_classes must be positive");
  if (m.embedding_dim < 1) fail(ErrorKind::Validation, path.string() + ": embedding_dim must be positive");

  const auto blocks = required<json>(doc, "blocks", path);
  if (!blocks.is_array() || blocks.empty()) {
    fail(ErrorKind::Validation, path.string() + ": \"blocks\" must be a non-empty array");
  }
  for (const auto& b : blocks) {
    BlockSpec spec;
    spec.id = required<int>(b, "id", path);
    spec.height = required<std::int64_t>(b, "h", path);
    spec.width = required<std::int64_t>(b, "w", path);
    spec.channels = required<std::int64_t>(b, "c", path);
    spec.path = resolve(required<std::string>(b, "path", path));
    if (spec.height < 1 || spec.width < 1 || spec.channels < 1) {
      fail(ErrorKind::Validation, path.string() + ": block " + std::to_string(spec.id) +
                                      " has non-positive dimensions");
    }
    if (!m.blocks.empty()) {
      const BlockSpec& prev = m.blocks.back();
      if (spec.id <= prev.id) {
        fail(ErrorKind::Validation, path.string() + ": block ids must be strictly increasing (" +
                                        std::to_string(prev.id) + " then " + std::to_string(spec.id) + ")");
      }
      if (spec.height * spec.width > prev.height * prev.width) {
        fail(ErrorKind::Validation, path.string() + ": block " + std::to_string(spec.id) +
                                        " has a larger grid than shallower block " +
                                        std::to_string(prev.id));
      }
    }
    m.blocks.push_back(std::move(spec));
  }

  const NpyHeader emb = header_of(m.embeddings, "embeddings");
  m.num_samples = emb.shape.front();
  const std::int64_t n = m.num_samples;
  const std::int64_t d = m.embedding_dim;
  const std::int64_t c = m.num_classes;
  expect_shape(m.embeddings, emb, DType::F32, {n, d}, "embeddings");
  expect_shape(m.classifier, header_of(m.classifier, "classifier"), DType::F32, {d, c}, "classifier");
  expect_shape(m.labels, header_of(m.labels, "labels"), DType::I64, {n}, "labels");
  expect_shape(m.split_path, header_of(m.split_path, "split"), DType::I64, {n}, "split");
  for (const auto& b : m.blocks) {
    expect_shape(b.path, header_of(b.path, "block"), DType::F32,
                 {n, b.height, b.width, b.channels}, "block");
  }

  m.label_values = read_tensor(m.labels).i64();
  for (std::size_t i = 0; i < m.label_values.size(); ++i) {
    if (m.label_values[i] < 0 || m.label_values[i] >= c) {
      fail(ErrorKind::Validation, "labels " + m.labels.string() + ": sample " + std::to_string(i) +
                                      " has label " + std::to_string(m.label_values[i]) +
                                      " outside [0, " + std::to_string(c) + ")");
    }
  }
  const TensorBlob split_blob = read_tensor(m.split_path);
  for (const auto v : split_blob.i64()) {
    if (v != 0 && v != 1) {
      fail(ErrorKind::Validation, "split " + m.split_path.string() + ": tag " + std::to_string(v) +
                                      " is neither 0 (train) nor 1 (test)");
    }
    m.split_values.push_back(static_cast<Split>(v));
  }

  if (doc.contains("images")) {
    const auto images = required<std::vector<std::string>>(doc, "images", path);
    if (static_cast<std::int64_t>(images.size()) != n) {
      fail(ErrorKind::Validation, path.string() + ": \"images\" lists " + std::to_string(images.size()) +
                                      " files for " + std::to_string(n) + " samples");
    }
    for (const auto& img : images) m.images.push_back(resolve(img));
  }
  return m;
}

void write_manifest(const DatasetManifest& m, const fs::path& path) {
  const fs::path base = path.parent_path();
  auto rel = [&](const fs::path& p) { return p.lexically_relative(base).generic_string(); };
  json doc;
  doc["dataset"] = m.dataset_name;
  doc["num_classes"] = m.num_classes;
  doc["embedding_dim"] = m.embedding_dim;
  doc["blocks"] = json::array();
  for (const auto& b : m.blocks) {
    doc["blocks"].push_back({{"id", b.id}, {"h", b.height}, {"w", b.width}, {"c", b.channels},
                             {"path", rel(b.path)}});
  }
  doc["embeddings"] = rel(m.embeddings);
  doc["classifier"] = rel(m.classifier);
  doc["labels"] = rel(m.labels);
  doc["split"] = rel(m.split_path);
  if (!m.bias_handling.empty()) doc["bias"] = m.bias_handling;
  if (!m.images.empty()) {
    doc["images"] = json::array();
    for (const auto& p : m.images) doc["images"].push_back(rel(p));
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write manifest " + path.string());
  out << doc.dump(2) << '\n';
}

// ---------------------------------------------------------------------------

const FeatureGrid& ActivationRecord::block(int id) const {
  const auto it = per_block.find(id);
  if (it == per_block.end()) {
    fail(ErrorKind::Config, "record " + std::to_string(sample_id) + " has no block " +
                                std::to_string(id) + " loaded");
  }
  return it->second;
}

RecordStream::RecordStream(const DatasetManifest& manifest, SplitFilter filter,
                           int depth_from)
    : manifest_(&manifest),
      ids_(manifest.sample_ids(filter)),
      embeddings_(manifest.embeddings) {
  for (int id : manifest.block_ids_from(depth_from)) {
    blocks_.emplace_back(id, TensorFile(manifest.block(id).path));
  }
}

ActivationRecord RecordStream::load(std::int64_t sample_id) {
  if (!std::binary_search(ids_.begin(), ids_.end(), sample_id)) {
    fail(ErrorKind::Config, "sample " + std::to_string(sample_id) + " is not in the selected split of " +
                                manifest_->source.string());
  }
  ActivationRecord rec;
  rec.sample_id = sample_id;
  rec.label = manifest_->label_values[static_cast<std::size_t>(sample_id)];
  rec.split = manifest_->split_values[static_cast<std::size_t>(sample_id)];
  rec.embedding = embeddings_.read_f32_slice(sample_id);
  for (auto& [id, file] : blocks_) {
    const BlockSpec& spec = manifest_->block(id);
    rec.per_block.emplace(id, FeatureGrid(static_cast<std::size_t>(spec.height),
                                          static_cast<std::size_t>(spec.width),
                                          static_cast<std::size_t>(spec.channels),
                                          file.read_f32_slice(sample_id)));
  }
  return rec;
}

std::optional<ActivationRecord> RecordStream::next() {
  if (cursor_ >= ids_.size()) return std::nullopt;
  return load(ids_[cursor_++]);
}

Matrix load_embeddings(const DatasetManifest& manifest) {
  TensorBlob blob = read_tensor(manifest.embeddings);
  return Matrix(static_cast<std::size_t>(blob.shape()[0]), static_cast<std::size_t>(blob.shape()[1]),
                std::move(blob.f32()));
}

Matrix load_classifier_weights(const DatasetManifest& manifest) {
  TensorBlob blob = read_tensor(manifest.classifier);
  return Matrix(static_cast<std::size_t>(blob.shape()[0]), static_cast<std::size_t>(blob.shape()[1]),
                std::move(blob.f32()));
}

}  // namespace protoexplain
