#include "ccb/decimal.hpp"

#include "ccb/errors.hpp"

#include <cctype>
#include <stdexcept>

namespace ccb {

namespace {

mpz_class pow10(std::uint64_t n) {
    mpz_class p;
    mpz_ui_pow_ui(p.get_mpz_t(), 10, n);
    return p;
}

}  // namespace

void Decimal::normalize() {
    if (sgn(coeff_) == 0) {
        exp_ = 0;
        return;
    }
    // Strip factors of 10 into the exponent.
    while (mpz_divisible_ui_p(coeff_.get_mpz_t(), 10)) {
        mpz_divexact_ui(coeff_.get_mpz_t(), coeff_.get_mpz_t(), 10);
        ++exp_;
    }
}

Decimal Decimal::scaled(long coeff, std::int64_t exp) {
    Decimal d;
    d.coeff_ = coeff;
    d.exp_ = exp;
    d.normalize();
    return d;
}

std::optional<Decimal> Decimal::try_parse(std::string_view text) {
    std::size_t i = 0;
    const std::size_t n = text.size();
    bool negative = false;
    if (i < n && (text[i] == '+' || text[i] == '-')) {
        negative = text[i] == '-';
        ++i;
    }
    std::string digits;
    std::int64_t exp = 0;
    bool any_int = false, any_frac = false;
    while (i < n && std::isdigit(static_cast<unsigned char>(text[i]))) {
        digits.push_back(text[i]);
        ++i;
        any_int = true;
    }
    if (i < n && text[i] == '.') {
        ++i;
        while (i < n && std::isdigit(static_cast<unsigned char>(text[i]))) {
            digits.push_back(text[i]);
            --exp;
            ++i;
            any_frac = true;
        }
        if (!any_frac) return std::nullopt;  // "1." and "." rejected
    }
    if (i != n || !any_int) return std::nullopt;

    Decimal d;
    d.coeff_ = mpz_class(digits, 10);
    if (negative) d.coeff_ = -d.coeff_;
    d.exp_ = exp;
    d.normalize();
    return d;
}

Decimal Decimal::parse(std::string_view text) {
    auto d = try_parse(text);
    if (!d) throw NumberFormatError("not a plain decimal literal: \"" + std::string(text) + "\"");
    return *d;
}

Decimal Decimal::operator+(const Decimal& o) const {
    Decimal r;
    if (exp_ == o.exp_) {
        r.coeff_ = coeff_ + o.coeff_;
        r.exp_ = exp_;
    } else if (exp_ > o.exp_) {
        r.coeff_ = coeff_ * pow10(static_cast<std::uint64_t>(exp_ - o.exp_)) + o.coeff_;
        r.exp_ = o.exp_;
    } else {
        r.coeff_ = o.coeff_ * pow10(static_cast<std::uint64_t>(o.exp_ - exp_)) + coeff_;
        r.exp_ = exp_;
    }
    r.normalize();
    return r;
}

Decimal Decimal::operator-(const Decimal& o) const { return *this + (-o); }

Decimal Decimal::operator*(const Decimal& o) const {
    Decimal r;
    r.coeff_ = coeff_ * o.coeff_;
    r.exp_ = exp_ + o.exp_;
    r.normalize();
    return r;
}

Decimal Decimal::operator-() const {
    Decimal r;
    r.coeff_ = -coeff_;
    r.exp_ = exp_;
    return r;
}

Decimal Decimal::abs() const { return sign() < 0 ? -*this : *this; }

std::int64_t Decimal::digit_count() const {
    if (is_zero()) return 0;
    // sizeinbase can overestimate by one for base 10; correct it exactly.
    std::size_t est = mpz_sizeinbase(coeff_.get_mpz_t(), 10);
    if (est == 0) return 0;
    mpz_class a = ::abs(coeff_);
    if (a < pow10(static_cast<std::uint64_t>(est - 1))) return static_cast<std::int64_t>(est) - 1;
    return static_cast<std::int64_t>(est);
}

std::int64_t Decimal::adjusted_exponent() const {
    if (is_zero()) return 0;
    return exp_ + digit_count() - 1;
}

int Decimal::compare(const Decimal& o) const {
    int sa = sign(), sb = o.sign();
    if (sa != sb) return sa < sb ? -1 : 1;
    if (sa == 0) return 0;
    // Align exponents and compare coefficients.
    if (exp_ == o.exp_) return cmp(coeff_, o.coeff_);
    if (exp_ > o.exp_) {
        mpz_class lhs = coeff_ * pow10(static_cast<std::uint64_t>(exp_ - o.exp_));
        return cmp(lhs, o.coeff_);
    }
    mpz_class rhs = o.coeff_ * pow10(static_cast<std::uint64_t>(o.exp_ - exp_));
    return cmp(coeff_, rhs);
}

Decimal Decimal::divide(const Decimal& o) const {
    if (o.is_zero()) throw std::domain_error("decimal division by zero");
    if (is_zero()) return Decimal();

    const int result_sign = sign() * o.sign();
    mpz_class num = ::abs(coeff_);
    mpz_class den = ::abs(o.coeff_);
    const std::int64_t base_exp = exp_ - o.exp_;

    const std::int64_t dn = digit_count();
    const std::int64_t dd = o.digit_count();

    // Scale the numerator so the integer quotient carries P+1 or P+2 digits,
    // then round the surplus away half-even using the exact remainder.
    const std::int64_t shift = kDivisionPrecision + 1 - (dn - dd);
    if (shift >= 0) {
        num *= pow10(static_cast<std::uint64_t>(shift));
    } else {
        den *= pow10(static_cast<std::uint64_t>(-shift));
    }

    mpz_class q, r;
    mpz_tdiv_qr(q.get_mpz_t(), r.get_mpz_t(), num.get_mpz_t(), den.get_mpz_t());

    Decimal quot;
    quot.coeff_ = q;
    quot.exp_ = 0;
    std::int64_t dq = quot.digit_count();
    std::int64_t excess = dq - kDivisionPrecision;  // 1 or 2 by construction
    if (excess < 1) excess = 1;                     // defensive; cannot trigger for dq >= P+1

    mpz_class modulus = pow10(static_cast<std::uint64_t>(excess));
    mpz_class q0 = q / modulus;
    mpz_class dropped = q % modulus;
    const bool sticky = sgn(r) != 0;

    mpz_class twice = dropped * 2;
    bool round_up = false;
    if (twice > modulus) {
        round_up = true;
    } else if (twice == modulus) {
        round_up = sticky || mpz_odd_p(q0.get_mpz_t());
    }
    if (round_up) q0 += 1;

    Decimal result;
    result.coeff_ = result_sign < 0 ? mpz_class(-q0) : q0;
    result.exp_ = base_exp - shift + excess;
    result.normalize();
    return result;
}

std::string Decimal::to_string() const {
    if (is_zero()) return "0";
    std::string digits = mpz_class(::abs(coeff_)).get_str();
    std::string out;
    if (sign() < 0) out.push_back('-');

    if (exp_ >= 0) {
        out += digits;
        out.append(static_cast<std::size_t>(exp_), '0');
        return out;
    }
    const std::int64_t frac = -exp_;
    const std::int64_t len = static_cast<std::int64_t>(digits.size());
    if (len > frac) {
        out += digits.substr(0, static_cast<std::size_t>(len - frac));
        out.push_back('.');
        out += digits.substr(static_cast<std::size_t>(len - frac));
    } else {
        out += "0.";
        out.append(static_cast<std::size_t>(frac - len), '0');
        out += digits;
    }
    return out;
}

std::string Decimal::to_fixed(int frac_digits) const {
    // Round coefficient*10^exp to an integer count of 10^-frac_digits units.
    mpz_class units;
    const std::int64_t k = exp_ + frac_digits;
    bool negative = sign() < 0;
    mpz_class mag = ::abs(coeff_);
    if (k >= 0) {
        units = mag * pow10(static_cast<std::uint64_t>(k));
    } else {
        mpz_class modulus = pow10(static_cast<std::uint64_t>(-k));
        mpz_class q = mag / modulus;
        mpz_class rem = mag % modulus;
        mpz_class twice = rem * 2;
        if (twice > modulus || (twice == modulus && mpz_odd_p(q.get_mpz_t()))) q += 1;
        units = q;
    }
    std::string digits = units.get_str();
    if (static_cast<int>(digits.size()) <= frac_digits) {
        digits.insert(0, static_cast<std::size_t>(frac_digits + 1) - digits.size(), '0');
    }
    std::string out;
    if (negative && sgn(units) != 0) out.push_back('-');
    if (frac_digits == 0) {
        out += digits;
    } else {
        out += digits.substr(0, digits.size() - static_cast<std::size_t>(frac_digits));
        out.push_back('.');
        out += digits.substr(digits.size() - static_cast<std::size_t>(frac_digits));
    }
    return out;
}

}  // namespace ccb
