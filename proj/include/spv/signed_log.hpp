#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace spv {

// A real number held as sign * exp(lg). Zero is sign==0, lg==-inf.
// Exponents in this project reach +-n/rho/(1-c) with n up to 1e12, so linear
// doubles are not an option for intermediates.
struct SignedLog {
    int sign = 0;      // -1, 0, +1
    double lg = -std::numeric_limits<double>::infinity();

    SignedLog() = default;
    SignedLog(int s, double l) : sign(s), lg(l) {
        if (sign == 0 || lg == -std::numeric_limits<double>::infinity()) {
            sign = 0;
            lg = -std::numeric_limits<double>::infinity();
        }
    }

    static SignedLog zero() { return SignedLog(); }
    static SignedLog one() { return SignedLog(1, 0.0); }

    static SignedLog from_linear(double v) {
        if (v == 0.0) return zero();
        return SignedLog(v > 0 ? 1 : -1, std::log(std::fabs(v)));
    }
    static SignedLog from_log(double l) { return SignedLog(1, l); }

    double linear() const {
        if (sign == 0) return 0.0;
        return sign * std::exp(lg);
    }
    bool is_zero() const { return sign == 0; }

    SignedLog operator*(const SignedLog& o) const {
        if (sign == 0 || o.sign == 0) return zero();
        return SignedLog(sign * o.sign, lg + o.lg);
    }
    SignedLog operator/(const SignedLog& o) const {
        return SignedLog(sign * o.sign, lg - o.lg);
    }
    SignedLog operator-() const { return SignedLog(-sign, lg); }

    // Integer power, sign tracked.
    SignedLog pow_int(long long t) const {
        if (sign == 0) return t == 0 ? one() : zero();
        const int s = (sign < 0 && (t & 1)) ? -1 : 1;
        return SignedLog(s, lg * static_cast<double>(t));
    }

    SignedLog abs() const { return SignedLog(sign == 0 ? 0 : 1, lg); }

    // Exact-ish signed log-sum-exp for two values.
    SignedLog operator+(const SignedLog& o) const {
        if (sign == 0) return o;
        if (o.sign == 0) return *this;
        const SignedLog *hi = this, *lo = &o;
        if (o.lg > lg) { hi = &o; lo = this; }
        const double delta = lo->lg - hi->lg;  // <= 0
        if (hi->sign == lo->sign)
            return SignedLog(hi->sign, hi->lg + std::log1p(std::exp(delta)));
        const double m = -std::expm1(delta);  // in [0,1]
        if (m == 0.0) return zero();
        return SignedLog(hi->sign, hi->lg + std::log(m));
    }
    SignedLog operator-(const SignedLog& o) const { return *this + (-o); }

    bool operator<(const SignedLog& o) const {
        if (sign != o.sign) return sign < o.sign;
        if (sign == 0) return false;
        return sign > 0 ? lg < o.lg : lg > o.lg;
    }
};

// Order-stable accumulator for many signed-log terms: values are rescaled by a
// running maximum and summed with Neumaier compensation in the linear domain.
class SignedLogSum {
public:
    void add(const SignedLog& v) {
        if (v.sign == 0) return;
        if (v.lg > offset_ + 300.0 || count_ == 0) rescale(v.lg);
        kadd(v.sign * std::exp(v.lg - offset_));
        ++count_;
    }
    void add_linear_scaled(double v_at_offset) {  // caller matched offset
        kadd(v_at_offset);
        ++count_;
    }
    SignedLog total() const {
        const double t = sum_ + comp_;
        if (t == 0.0 || count_ == 0) return SignedLog::zero();
        return SignedLog(t > 0 ? 1 : -1, offset_ + std::log(std::fabs(t)));
    }
    // Sum of |terms|, same offset (useful as an L1 scale for tolerances).
    SignedLog total_abs() const {
        const double t = abs_sum_;
        if (t == 0.0) return SignedLog::zero();
        return SignedLog(1, offset_ + std::log(t));
    }
    double offset() const { return offset_; }

private:
    void rescale(double new_offset) {
        if (count_ > 0) {
            const double f = std::exp(offset_ - new_offset);
            sum_ *= f;
            comp_ *= f;
            abs_sum_ *= f;
        }
        offset_ = new_offset;
    }
    void kadd(double x) {
        const double t = sum_ + x;
        if (std::fabs(sum_) >= std::fabs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
        abs_sum_ += std::fabs(x);
    }

    double offset_ = 0.0;
    double sum_ = 0.0;
    double comp_ = 0.0;
    double abs_sum_ = 0.0;
    long long count_ = 0;
};

}  // namespace spv
