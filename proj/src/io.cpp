#include "hyperv2x/io.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace hyperv2x::io {

namespace fs = std::filesystem;

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t seed) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a(const std::string& s) { return fnv1a(s.data(), s.size()); }

std::string hex64(std::uint64_t x) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, x);
  return std::string(buf);
}

static void atomic_write_impl(const fs::path& path, const void* data, std::size_t n) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + tmp.string());
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!out) throw std::runtime_error("short write: " + tmp.string());
  }
  fs::rename(tmp, path);
}

void atomic_write(const fs::path& path, const std::string& content) {
  atomic_write_impl(path, content.data(), content.size());
}

void atomic_write(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  atomic_write_impl(path, bytes.data(), bytes.size());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// ---------------------------------------------------------------------------
// ArrayBundle

namespace {

constexpr char kMagic[8] = {'H', 'V', 'X', 'T', 'N', 'S', '1', '\n'};

template <typename T>
void put(std::vector<std::uint8_t>& out, T x) {
  std::uint8_t buf[sizeof(T)];
  std::memcpy(buf, &x, sizeof(T));
  out.insert(out.end(), buf, buf + sizeof(T));
}

template <typename T>
T take(const std::vector<std::uint8_t>& in, std::size_t& off) {
  if (off + sizeof(T) > in.size()) throw std::runtime_error("array container truncated");
  T x;
  std::memcpy(&x, in.data() + off, sizeof(T));
  off += sizeof(T);
  return x;
}

}  // namespace

std::vector<std::uint8_t> ArrayBundle::encode() const {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + sizeof(kMagic));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(f64.size() + i32.size()));
  auto put_name = [&out](const std::string& name) {
    put<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
  };
  for (const auto& [name, t] : f64) {
    put_name(name);
    put<std::uint8_t>(out, 0);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(t.rank()));
    for (auto d : t.shape) put<std::uint64_t>(out, static_cast<std::uint64_t>(d));
    const auto* bytes = reinterpret_cast<const std::uint8_t*>(t.v.data());
    out.insert(out.end(), bytes, bytes + t.v.size() * sizeof(double));
  }
  for (const auto& [name, g] : i32) {
    put_name(name);
    put<std::uint8_t>(out, 1);
    put<std::uint8_t>(out, 2);
    put<std::uint64_t>(out, static_cast<std::uint64_t>(g.h));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(g.w));
    const auto* bytes = reinterpret_cast<const std::uint8_t*>(g.v.data());
    out.insert(out.end(), bytes, bytes + g.v.size() * sizeof(std::int32_t));
  }
  return out;
}

ArrayBundle ArrayBundle::decode(const std::vector<std::uint8_t>& bytes) {
  std::size_t off = 0;
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("array container: bad magic");
  off = sizeof(kMagic);
  const auto count = take<std::uint32_t>(bytes, off);
  ArrayBundle b;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = take<std::uint16_t>(bytes, off);
    if (off + name_len > bytes.size()) throw std::runtime_error("array container truncated");
    std::string name(reinterpret_cast<const char*>(bytes.data() + off), name_len);
    off += name_len;
    const auto dtype = take<std::uint8_t>(bytes, off);
    const auto rank = take<std::uint8_t>(bytes, off);
    std::vector<std::int64_t> dims;
    std::int64_t n = 1;
    for (std::uint8_t d = 0; d < rank; ++d) {
      dims.push_back(static_cast<std::int64_t>(take<std::uint64_t>(bytes, off)));
      n *= dims.back();
    }
    if (dtype == 0) {
      Tensor t(dims);
      if (off + static_cast<std::size_t>(n) * sizeof(double) > bytes.size())
        throw std::runtime_error("array container truncated");
      std::memcpy(t.v.data(), bytes.data() + off, static_cast<std::size_t>(n) * sizeof(double));
      off += static_cast<std::size_t>(n) * sizeof(double);
      b.f64.emplace(std::move(name), std::move(t));
    } else if (dtype == 1) {
      if (rank != 2) throw std::runtime_error("array container: i32 arrays must be rank 2");
      GridI g(dims[0], dims[1]);
      if (off + static_cast<std::size_t>(n) * sizeof(std::int32_t) > bytes.size())
        throw std::runtime_error("array container truncated");
      std::memcpy(g.v.data(), bytes.data() + off, static_cast<std::size_t>(n) * sizeof(std::int32_t));
      off += static_cast<std::size_t>(n) * sizeof(std::int32_t);
      b.i32.emplace(std::move(name), std::move(g));
    } else {
      throw std::runtime_error("array container: unknown dtype");
    }
  }
  return b;
}

void ArrayBundle::save(const fs::path& path) const { atomic_write(path, encode()); }

ArrayBundle ArrayBundle::load(const fs::path& path) {
  const std::string s = read_file(path);
  return decode(std::vector<std::uint8_t>(s.begin(), s.end()));
}

// ---------------------------------------------------------------------------
// CSV

CsvWriter::CsvWriter(std::string schema, std::vector<std::string> columns)
    : schema_(std::move(schema)), columns_(std::move(columns)) {}

void CsvWriter::add_row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_.size())
    throw std::invalid_argument("CsvWriter: row width does not match header");
  rows_.push_back(cells);
}

std::string CsvWriter::fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", x);
  return std::string(buf);
}

std::string CsvWriter::fmt(std::int64_t x) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%" PRId64, x);
  return std::string(buf);
}

std::string CsvWriter::str() const {
  std::ostringstream os;
  os << "# schema: " << schema_ << "\n";
  for (std::size_t i = 0; i < columns_.size(); ++i) os << (i ? "," : "") << columns_[i];
  os << "\n";
  for (const auto& row : rows_) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
    os << "\n";
  }
  return os.str();
}

void CsvWriter::write(const fs::path& path) const { atomic_write(path, str()); }

static std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

CsvData parse_csv(const std::string& text) {
  CsvData d;
  std::istringstream is(text);
  std::string line;
  bool have_header = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line.rfind("# schema: ", 0) == 0) {
      d.schema = line.substr(10);
      continue;
    }
    if (!have_header) {
      d.header = split_commas(line);
      have_header = true;
    } else {
      d.rows.push_back(split_commas(line));
    }
  }
  return d;
}

std::size_t CsvData::col(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw std::runtime_error("csv: no column named " + name);
}

double CsvData::num(std::size_t row, const std::string& name) const {
  return std::stod(rows.at(row).at(col(name)));
}

}  // namespace hyperv2x::io
