#pragma once
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ccb {

// ---------------------------------------------------------------------------
// Hashing

/// FNV-1a over the raw bytes, rendered as 16 lowercase hex digits.
/// Used as the stable prompt key for transcript files.
std::string fnv1a64_hex(std::string_view data);

/// SHA-256 of the raw bytes as 64 lowercase hex digits. Used for content
/// hashes of emitted files (run provenance).
std::string sha256_hex(std::string_view data);

// ---------------------------------------------------------------------------
// Strings

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);
/// Lowercase + collapse runs of whitespace to single spaces + trim.
/// The label-folding rule used by alias resolution.
std::string fold_label(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

// ---------------------------------------------------------------------------
// Files

std::string read_file(const std::string& path);          // throws IoError
void write_file(const std::string& path, std::string_view data);

// ---------------------------------------------------------------------------
// Seeded RNG
//
// mt19937_64 gives a standard-defined sequence; the derivation helpers below
// avoid std::*_distribution, whose output is implementation-defined, so that
// identical seeds produce identical bytes on every platform.

class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t u64() { return gen_(); }

    /// Uniform in [0, n). Modulo reduction; bias is irrelevant at our n.
    std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : u64() % n; }

    /// Uniform integer in [lo, hi], inclusive.
    std::int64_t range(std::int64_t lo, std::int64_t hi) {
        return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo + 1)));
    }

    /// Uniform in [0, 1) with 53 bits.
    double unit() { return static_cast<double>(u64() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return unit() < p; }

    /// Index into a weight vector, proportional to weight.
    std::size_t pick_weighted(std::span<const double> weights);

    /// Fresh generator seeded from this one plus a salt; lets independent
    /// sub-streams stay stable when unrelated draws are added elsewhere.
    Rng fork(std::uint64_t salt) { return Rng(u64() ^ (salt * 0x9e3779b97f4a7c15ULL)); }

private:
    std::mt19937_64 gen_;
};

}  // namespace ccb
