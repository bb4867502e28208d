#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rtd/tensor.hpp"

namespace rtd {

/// Raised for unreadable, unwritable or malformed files. what() names the path.
class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// RT3D: "RT3D", u32 version = 1, u32 n1, n2, n3, then n1*n2*n3 little-endian
// f64 values in Tensor3 index order.
void write_dense(const std::filesystem::path& path, const Tensor3& t);
Tensor3 read_dense(const std::filesystem::path& path);

// RT3S: "RT3S", u32 version = 1, u32 n, u64 count, then count records
// (u32 i, u32 j, u32 k, f64 v) in lexicographic order.
void write_sparse(const std::filesystem::path& path, const SparseTensor3& s);
SparseTensor3 read_sparse(const std::filesystem::path& path);

// Factor text file:
//   RT3F 1
//   n <n>
//   rank <r>
//   <lambda> <u_0> ... <u_{n-1}>     (one line per term, %.17g)
void write_factors(const std::filesystem::path& path, const FactorModel& f);
FactorModel read_factors(const std::filesystem::path& path);

/// Ordered key=value records; keys may repeat.
using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// Lines are `key=value`; blank lines and lines starting with '#' are skipped.
KeyValues parse_key_values(const std::string& text, const std::string& origin = "<string>");
KeyValues read_key_values(const std::filesystem::path& path);
void write_key_values(const std::filesystem::path& path, const KeyValues& kv);

// Scalar parsing for text inputs; std::invalid_argument names `what` on failure.
double parse_double(const std::string& s, const std::string& what);
long long parse_int(const std::string& s, const std::string& what);
/// Accepts 1/0, true/false, yes/no, on/off.
bool parse_bool(const std::string& s, const std::string& what);

/// %.17g formatting, round-trips every finite double.
std::string format_double(double x);

}  // namespace rtd
