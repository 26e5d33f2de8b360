// common.hpp - shared scalar/matrix aliases, checks, seeded RNG, hashing, IO.

// Copyright 2026 The Pitmix Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Dense>

#include <bit>
#include <charconv>
#include <cstdint>
#include <exception>
#include <functional>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace pitmix {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Eigen::Index;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define PITMIX_CHECK(cond, msg)                                      \
  do {                                                               \
    if (!(cond)) throw ::pitmix::Error(std::string(msg));            \
  } while (0)

inline std::string str_of(double v) { return std::to_string(v); }
inline std::string str_of(Index v) { return std::to_string(v); }

// ---------------------------------------------------------------------------
// Seeded RNG. splitmix64 keeps every stream a pure function of its seed and
// is identical across platforms, unlike the std:: distributions.
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Derive an independent child seed for (stream tag, element index).
inline std::uint64_t child_seed(std::uint64_t master, std::uint64_t tag,
                                std::uint64_t index) {
  return splitmix64(splitmix64(master ^ (tag * 0x9e3779b97f4a7c15ull)) ^ index);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    std::uint64_t x = state_;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  // Uniform in [0, 1).
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi] inclusive.
  int uniform_int(int lo, int hi) {
    std::uint64_t n = std::uint64_t(hi - lo) + 1;
    return lo + int((unsigned __int128)(next_u64()) * n >> 64);
  }

  // Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = std::size_t(uniform_int(0, int(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
};

// ---------------------------------------------------------------------------
// FNV-1a 64-bit hash, used for config fingerprints.
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex16(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[std::size_t(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

// ---------------------------------------------------------------------------
// Little-endian binary IO for the on-disk record and checkpoint formats.
// ---------------------------------------------------------------------------

static_assert(std::endian::native == std::endian::little,
              "on-disk formats assume a little-endian host");

template <typename T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  PITMIX_CHECK(bool(is), "unexpected end of stream");
  return v;
}

inline void write_u32(std::ostream& os, std::uint32_t v) { write_pod(os, v); }
inline void write_f32(std::ostream& os, float v) { write_pod(os, v); }
inline void write_f64(std::ostream& os, double v) { write_pod(os, v); }
inline std::uint32_t read_u32(std::istream& is) { return read_pod<std::uint32_t>(is); }
inline float read_f32(std::istream& is) { return read_pod<float>(is); }
inline double read_f64(std::istream& is) { return read_pod<double>(is); }

// ---------------------------------------------------------------------------
// Locale-independent numeric text. to_chars emits the shortest string that
// parses back bit-exactly, so manifests, logs and reports round trip.
// ---------------------------------------------------------------------------

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  PITMIX_CHECK(res.ec == std::errc() && res.ptr == s.data() + s.size(),
               "bad numeric field '" + s + "'");
  return v;
}

inline long parse_long(const std::string& s) {
  long v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  PITMIX_CHECK(res.ec == std::errc() && res.ptr == s.data() + s.size(),
               "bad integer field '" + s + "'");
  return v;
}

// ---------------------------------------------------------------------------
// Deterministic parallel map: results are produced per index and consumed in
// index order, so the outcome is independent of the worker count.
// ---------------------------------------------------------------------------

inline void parallel_for(std::size_t n, int jobs,
                         const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::size_t workers = std::min<std::size_t>(std::size_t(jobs), n);
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace pitmix
