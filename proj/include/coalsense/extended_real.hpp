#pragma once

#include <cmath>
#include <compare>
#include <ostream>
#include <stdexcept>

namespace coalsense {

/// A real number or one of the two infinities, kept as an explicit tag so
/// barrier semantics never depend on floating overflow.
class ExtendedReal {
 public:
  enum class Kind { NegInf, Finite, PosInf };

  constexpr ExtendedReal() = default;
  ExtendedReal(double v) : kind_(Kind::Finite), value_(v) {  // NOLINT(implicit)
    if (std::isnan(v)) throw std::domain_error("ExtendedReal: NaN");
    if (std::isinf(v)) {
      kind_ = v > 0 ? Kind::PosInf : Kind::NegInf;
      value_ = 0.0;
    }
  }

  static constexpr ExtendedReal pos_inf() { return ExtendedReal(Kind::PosInf); }
  static constexpr ExtendedReal neg_inf() { return ExtendedReal(Kind::NegInf); }

  constexpr Kind kind() const { return kind_; }
  constexpr bool is_finite() const { return kind_ == Kind::Finite; }
  constexpr bool is_neg_inf() const { return kind_ == Kind::NegInf; }
  constexpr bool is_pos_inf() const { return kind_ == Kind::PosInf; }

  /// Finite value; throws for the infinities.
  double value() const {
    if (!is_finite()) throw std::domain_error("ExtendedReal: value() on infinity");
    return value_;
  }

  /// IEEE double, mapping the tags to +-infinity. Only for output.
  double to_double() const {
    switch (kind_) {
      case Kind::NegInf: return -HUGE_VAL;
      case Kind::PosInf: return HUGE_VAL;
      default: return value_;
    }
  }

  friend constexpr bool operator==(const ExtendedReal& a, const ExtendedReal& b) {
    return a.kind_ == b.kind_ && (a.kind_ != Kind::Finite || a.value_ == b.value_);
  }

  friend constexpr std::strong_ordering operator<=>(const ExtendedReal& a, const ExtendedReal& b) {
    if (a.kind_ != b.kind_) return rank(a.kind_) <=> rank(b.kind_);
    if (a.kind_ != Kind::Finite) return std::strong_ordering::equal;
    if (a.value_ < b.value_) return std::strong_ordering::less;
    if (a.value_ > b.value_) return std::strong_ordering::greater;
    return std::strong_ordering::equal;
  }

  friend ExtendedReal operator-(const ExtendedReal& a) {
    switch (a.kind_) {
      case Kind::NegInf: return pos_inf();
      case Kind::PosInf: return neg_inf();
      default: return ExtendedReal(-a.value_);
    }
  }

  friend ExtendedReal operator+(const ExtendedReal& a, const ExtendedReal& b) {
    if ((a.is_pos_inf() && b.is_neg_inf()) || (a.is_neg_inf() && b.is_pos_inf()))
      throw std::domain_error("ExtendedReal: inf - inf");
    if (!a.is_finite()) return a;
    if (!b.is_finite()) return b;
    return ExtendedReal(a.value_ + b.value_);
  }

  friend ExtendedReal operator-(const ExtendedReal& a, const ExtendedReal& b) { return a + (-b); }

  friend std::ostream& operator<<(std::ostream& os, const ExtendedReal& x) {
    switch (x.kind_) {
      case Kind::NegInf: return os << "-inf";
      case Kind::PosInf: return os << "+inf";
      default: return os << x.value_;
    }
  }

 private:
  explicit constexpr ExtendedReal(Kind k) : kind_(k) {}
  static constexpr int rank(Kind k) { return k == Kind::NegInf ? 0 : (k == Kind::Finite ? 1 : 2); }

  Kind kind_ = Kind::Finite;
  double value_ = 0.0;
};

}  // namespace coalsense
