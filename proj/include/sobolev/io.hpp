#pragma once

#include "sobolev/field.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace sobo {

// Binary container: 16-byte magic (ASCII, NUL padded), then two uint64
// dimensions, then rows*cols float64 values row-major. All integers and
// doubles little-endian.
inline constexpr std::string_view kFieldMagic = "SOBFLD01";
inline constexpr std::string_view kSpectrumMagic = "SOBSPC01";
inline constexpr std::string_view kParamsMagic = "SOBPRM01";

std::string encode_field(const Field2D& f);
std::string encode_spectrum(const Spectrum2D& s);
Field2D decode_field(std::string_view bytes);
Spectrum2D decode_spectrum(std::string_view bytes);

void write_field(const std::filesystem::path& path, const Field2D& f);
Field2D read_field(const std::filesystem::path& path);
void write_spectrum(const std::filesystem::path& path, const Spectrum2D& s);
Spectrum2D read_spectrum(const std::filesystem::path& path);

namespace io_detail {
void put_u64(std::string& out, std::uint64_t v);
void put_f64(std::string& out, double v);
std::uint64_t get_u64(std::string_view bytes, std::size_t& pos);
double get_f64(std::string_view bytes, std::size_t& pos);
void put_magic(std::string& out, std::string_view magic);
void expect_magic(std::string_view bytes, std::size_t& pos, std::string_view magic);
} // namespace io_detail

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

/// Ordered key=value text; '#' starts a comment line, blank lines ignored.
class KeyValues {
public:
  static KeyValues parse(std::string_view text);
  static KeyValues load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  void set(const std::string& key, std::string value) { entries_[key] = std::move(value); }

  std::string get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;

  const std::map<std::string, std::string>& entries() const noexcept { return entries_; }

  std::string serialize() const;

private:
  std::map<std::string, std::string> entries_;
};

/// Shortest text that round-trips to the same double.
std::string format_double(double v);

/// Comma-separated list of doubles, e.g. "0,1.5,3".
std::vector<double> parse_double_list(std::string_view text);

} // namespace sobo
