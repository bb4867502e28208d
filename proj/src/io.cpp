#include "rtd/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <tuple>

namespace rtd {

namespace fs = std::filesystem;

namespace {

constexpr std::uint32_t kVersion = 1;

template <class T>
T to_little(T x) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &x, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&x, b, sizeof(T));
  }
  return x;
}

class Writer {
public:
  explicit Writer(const fs::path& path) : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw IoError("cannot open " + path.string() + " for writing");
  }
  void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  template <class T>
  void put(T x) {
    x = to_little(x);
    bytes(&x, sizeof(T));
  }
  void finish() {
    out_.flush();
    if (!out_) throw IoError("write failed for " + path_.string());
  }

private:
  fs::path path_;
  std::ofstream out_;
};

class Reader {
public:
  explicit Reader(const fs::path& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw IoError("cannot open " + path.string());
  }
  void bytes(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) fail("unexpected end of file");
  }
  template <class T>
  T get() {
    T x;
    bytes(&x, sizeof(T));
    return to_little(x);
  }
  void magic(const char* expected) {
    char m[4];
    bytes(m, 4);
    if (std::memcmp(m, expected, 4) != 0) fail(std::string("bad magic, expected ") + expected);
    if (const auto v = get<std::uint32_t>(); v != kVersion) fail("unsupported version " + std::to_string(v));
  }
  void expect_end() {
    if (in_.peek() != std::char_traits<char>::eof()) fail("trailing bytes");
  }
  [[noreturn]] void fail(const std::string& what) const { throw IoError(path_.string() + ": " + what); }

private:
  fs::path path_;
  std::ifstream in_;
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spill(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace

double parse_double(const std::string& s, const std::string& what) {
  double x = 0.0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || end != s.data() + s.size() || !std::isfinite(x))
    throw std::invalid_argument(what + ": expected a number, got '" + s + "'");
  return x;
}

long long parse_int(const std::string& s, const std::string& what) {
  long long x = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || end != s.data() + s.size())
    throw std::invalid_argument(what + ": expected an integer, got '" + s + "'");
  return x;
}

bool parse_bool(const std::string& s, const std::string& what) {
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  throw std::invalid_argument(what + ": expected a boolean, got '" + s + "'");
}

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_dense(const fs::path& path, const Tensor3& t) {
  Writer w(path);
  w.bytes("RT3D", 4);
  w.put(kVersion);
  for (int m = 0; m < 3; ++m) w.put(static_cast<std::uint32_t>(t.dim(m)));
  for (double x : t.values()) w.put(x);
  w.finish();
}

Tensor3 read_dense(const fs::path& path) {
  Reader r(path);
  r.magic("RT3D");
  Tensor3::Shape shape{};
  for (auto& s : shape) s = r.get<std::uint32_t>();
  const auto total = static_cast<std::uint64_t>(shape[0]) * shape[1] * shape[2];
  if (const auto size = fs::file_size(path); size != 20 + 8 * total)
    r.fail("size " + std::to_string(size) + " does not match header");
  std::vector<double> values(total);
  for (auto& x : values) {
    x = r.get<double>();
    if (!std::isfinite(x)) r.fail("non-finite value");
  }
  r.expect_end();
  return Tensor3(shape, std::move(values));
}

void write_sparse(const fs::path& path, const SparseTensor3& s) {
  Writer w(path);
  w.bytes("RT3S", 4);
  w.put(kVersion);
  w.put(static_cast<std::uint32_t>(s.n()));
  w.put(static_cast<std::uint64_t>(s.nnz()));
  for (const auto& e : s.entries()) {
    w.put(e.i);
    w.put(e.j);
    w.put(e.k);
    w.put(e.value);
  }
  w.finish();
}

SparseTensor3 read_sparse(const fs::path& path) {
  Reader r(path);
  r.magic("RT3S");
  const auto n = r.get<std::uint32_t>();
  const auto count = r.get<std::uint64_t>();
  if (const auto size = fs::file_size(path); size != 20 + 20 * count)
    r.fail("size " + std::to_string(size) + " does not match header");
  std::vector<SparseEntry> entries(count);
  for (auto& e : entries) {
    e.i = r.get<std::uint32_t>();
    e.j = r.get<std::uint32_t>();
    e.k = r.get<std::uint32_t>();
    e.value = r.get<double>();
  }
  r.expect_end();
  for (std::size_t p = 1; p < entries.size(); ++p) {
    const auto& a = entries[p - 1];
    const auto& b = entries[p];
    if (std::tie(a.i, a.j, a.k) >= std::tie(b.i, b.j, b.k)) r.fail("records not strictly sorted");
  }
  try {
    return SparseTensor3(n, std::move(entries));
  } catch (const std::invalid_argument& e) {
    r.fail(e.what());
  }
}

void write_factors(const fs::path& path, const FactorModel& f) {
  std::string text = "RT3F 1\nn " + std::to_string(f.n()) + "\nrank " + std::to_string(f.rank()) + "\n";
  for (const auto& term : f.terms()) {
    text += format_double(term.lambda);
    for (double x : term.u) text += " " + format_double(x);
    text += "\n";
  }
  spill(path, text);
}

FactorModel read_factors(const fs::path& path) {
  std::istringstream in(slurp(path));
  auto fail = [&path](const std::string& what) -> void { throw IoError(path.string() + ": " + what); };
  std::string tag, key;
  int version = 0;
  std::size_t n = 0, rank = 0;
  if (!(in >> tag >> version) || tag != "RT3F" || version != 1) fail("bad factor file header");
  if (!(in >> key >> n) || key != "n") fail("missing n");
  if (!(in >> key >> rank) || key != "rank") fail("missing rank");
  FactorModel out(n);
  for (std::size_t t = 0; t < rank; ++t) {
    double lambda = 0.0;
    Vector u(static_cast<Eigen::Index>(n));
    if (!(in >> lambda)) fail("truncated term " + std::to_string(t));
    for (auto& x : u)
      if (!(in >> x)) fail("truncated term " + std::to_string(t));
    try {
      out.add(lambda, std::move(u));
    } catch (const std::invalid_argument& e) {
      fail(e.what());
    }
  }
  if (in >> key) fail("trailing data");
  return out;
}

KeyValues parse_key_values(const std::string& text, const std::string& origin) {
  KeyValues out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || eq == 0)
      throw IoError(origin + ":" + std::to_string(lineno) + ": expected key=value");
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

KeyValues read_key_values(const fs::path& path) { return parse_key_values(slurp(path), path.string()); }

void write_key_values(const fs::path& path, const KeyValues& kv) {
  std::string text;
  for (const auto& [k, v] : kv) text += k + "=" + v + "\n";
  spill(path, text);
}

}  // namespace rtd
