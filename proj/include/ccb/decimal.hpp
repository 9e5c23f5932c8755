#pragma once
#include <gmpxx.h>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace ccb {

/// Exact decimal number: coefficient * 10^exponent with an arbitrary-precision
/// integer coefficient. Addition, subtraction and multiplication are exact;
/// division rounds to kDivisionPrecision significant digits (half-even) when
/// the exact quotient does not terminate sooner. Values are kept normalized
/// (no trailing zero factors in the coefficient, zero is {0, 0}), so bitwise
/// equality coincides with numeric equality and to_string() is canonical.
///
/// There are no NaNs or infinities; magnitude-range policy is the caller's
/// (see kMaxAdjustedExponent, used by the calculation sandbox).
class Decimal {
public:
    static constexpr int kDivisionPrecision = 34;
    /// decimal128-style range bound on exponent + digits - 1.
    static constexpr std::int64_t kMaxAdjustedExponent = 6144;

    Decimal() : coeff_(0), exp_(0) {}
    explicit Decimal(long v) : coeff_(v), exp_(0) { normalize(); }

    /// coeff * 10^exp.
    static Decimal scaled(long coeff, std::int64_t exp);

    /// Strict plain decimal text: optional sign, digits, optional "." digits.
    /// Throws NumberFormatError on anything else (commas, scale words and
    /// parentheses are handled by the callers that own those conventions).
    static Decimal parse(std::string_view text);
    static std::optional<Decimal> try_parse(std::string_view text);

    Decimal operator+(const Decimal& o) const;
    Decimal operator-(const Decimal& o) const;
    Decimal operator*(const Decimal& o) const;
    Decimal operator-() const;

    /// Quotient rounded to kDivisionPrecision significant digits, half-even;
    /// exact when the exact quotient fits. Throws std::domain_error on a zero
    /// divisor: callers test is_zero() first and own the error policy.
    Decimal divide(const Decimal& o) const;

    Decimal abs() const;

    bool is_zero() const { return sgn(coeff_) == 0; }
    int sign() const { return sgn(coeff_); }

    int compare(const Decimal& o) const;
    bool operator==(const Decimal& o) const { return coeff_ == o.coeff_ && exp_ == o.exp_; }
    bool operator!=(const Decimal& o) const { return !(*this == o); }
    bool operator<(const Decimal& o) const { return compare(o) < 0; }
    bool operator<=(const Decimal& o) const { return compare(o) <= 0; }
    bool operator>(const Decimal& o) const { return compare(o) > 0; }
    bool operator>=(const Decimal& o) const { return compare(o) >= 0; }

    /// Decimal digits in |coefficient| (0 for zero). Exact.
    std::int64_t digit_count() const;
    /// exponent + digit_count - 1; 0 for zero.
    std::int64_t adjusted_exponent() const;
    std::int64_t exponent() const { return exp_; }

    bool within_range() const {
        return is_zero() || (adjusted_exponent() <= kMaxAdjustedExponent &&
                             adjusted_exponent() >= -kMaxAdjustedExponent);
    }

    /// Canonical plain positional rendering: "-123.45", "0", "0.007".
    /// Never exponent notation; no trailing fractional zeros.
    std::string to_string() const;

    /// Fixed-point rendering with exactly frac_digits decimals, rounded
    /// half-even. frac_digits >= 0.
    std::string to_fixed(int frac_digits) const;

    static Decimal min(const Decimal& a, const Decimal& b) { return a <= b ? a : b; }
    static Decimal max(const Decimal& a, const Decimal& b) { return a >= b ? a : b; }

private:
    void normalize();

    mpz_class coeff_;
    std::int64_t exp_;
};

}  // namespace ccb
