#include "sobolev/io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

namespace sobo {

namespace io_detail {

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

std::uint64_t get_u64(std::string_view bytes, std::size_t& pos) {
  if (pos + 8 > bytes.size()) throw ValidationError("truncated binary record");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
  pos += 8;
  return v;
}

double get_f64(std::string_view bytes, std::size_t& pos) {
  return std::bit_cast<double>(get_u64(bytes, pos));
}

void put_magic(std::string& out, std::string_view magic) {
  std::string padded(16, '\0');
  std::memcpy(padded.data(), magic.data(), magic.size());
  out += padded;
}

void expect_magic(std::string_view bytes, std::size_t& pos, std::string_view magic) {
  if (bytes.size() < pos + 16) throw ValidationError("truncated binary header");
  std::string padded(16, '\0');
  std::memcpy(padded.data(), magic.data(), magic.size());
  if (bytes.substr(pos, 16) != padded)
    throw ValidationError("bad magic, expected " + std::string(magic));
  pos += 16;
}

} // namespace io_detail

using namespace io_detail;

namespace {

template <class Tag>
std::string encode_grid(const BasicGrid<Tag>& g, std::string_view magic) {
  std::string out;
  out.reserve(32 + 8 * g.size());
  put_magic(out, magic);
  put_u64(out, g.rows());
  put_u64(out, g.cols());
  for (double v : g.values()) put_f64(out, v);
  return out;
}

template <class Tag>
BasicGrid<Tag> decode_grid(std::string_view bytes, std::string_view magic) {
  std::size_t pos = 0;
  expect_magic(bytes, pos, magic);
  const auto rows = get_u64(bytes, pos);
  const auto cols = get_u64(bytes, pos);
  if (rows == 0 || cols == 0 || rows > (1u << 20) || cols > (1u << 20))
    throw ValidationError("implausible grid dimensions in header");
  if (bytes.size() != pos + 8 * rows * cols)
    throw ValidationError("grid payload length does not match header");
  std::vector<double> values(rows * cols);
  for (auto& v : values) v = get_f64(bytes, pos);
  return BasicGrid<Tag>(rows, cols, std::move(values));
}

} // namespace

std::string encode_field(const Field2D& f) { return encode_grid(f, kFieldMagic); }
std::string encode_spectrum(const Spectrum2D& s) { return encode_grid(s, kSpectrumMagic); }
Field2D decode_field(std::string_view bytes) { return decode_grid<SpatialTag>(bytes, kFieldMagic); }
Spectrum2D decode_spectrum(std::string_view bytes) {
  return decode_grid<SpectralTag>(bytes, kSpectrumMagic);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path.string());
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

void write_field(const std::filesystem::path& path, const Field2D& f) {
  write_file(path, encode_field(f));
}

Field2D read_field(const std::filesystem::path& path) {
  try {
    return decode_field(read_file(path));
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void write_spectrum(const std::filesystem::path& path, const Spectrum2D& s) {
  write_file(path, encode_spectrum(s));
}

Spectrum2D read_spectrum(const std::filesystem::path& path) {
  try {
    return decode_spectrum(read_file(path));
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

} // namespace

KeyValues KeyValues::parse(std::string_view text) {
  KeyValues kv;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ValidationError("line " + std::to_string(line_no) + ": expected key=value");
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ValidationError("line " + std::to_string(line_no) + ": empty key");
    kv.entries_[std::string(key)] = std::string(trim(line.substr(eq + 1)));
  }
  return kv;
}

KeyValues KeyValues::load(const std::filesystem::path& path) {
  try {
    return parse(read_file(path));
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::string KeyValues::get(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw ValidationError("missing key: " + key);
  return it->second;
}

std::string KeyValues::get_or(const std::string& key, const std::string& fallback) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? fallback : it->second;
}

double KeyValues::get_double(const std::string& key, double fallback) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  const std::string& s = it->second;
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw ValidationError("key " + key + ": not a number: '" + s + "'");
  return v;
}

long long KeyValues::get_int(const std::string& key, long long fallback) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  const std::string& s = it->second;
  long long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw ValidationError("key " + key + ": not an integer: '" + s + "'");
  return v;
}

std::uint64_t KeyValues::get_u64(const std::string& key, std::uint64_t fallback) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  const std::string& s = it->second;
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw ValidationError("key " + key + ": not an unsigned integer: '" + s + "'");
  return v;
}

std::string KeyValues::serialize() const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + "=" + v + "\n";
  return out;
}

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

std::vector<double> parse_double_list(std::string_view text) {
  std::vector<double> out;
  while (!text.empty()) {
    const auto comma = text.find(',');
    const std::string_view item = trim(text.substr(0, comma));
    text = comma == std::string_view::npos ? std::string_view{} : text.substr(comma + 1);
    if (item.empty()) throw ValidationError("empty item in list");
    double v = 0.0;
    auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc() || p != item.data() + item.size())
      throw ValidationError("not a number in list: '" + std::string(item) + "'");
    out.push_back(v);
  }
  return out;
}

} // namespace sobo
