#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace scd {

// Dense shape with at most four axes, every extent >= 1.
class Shape {
  public:
    static constexpr std::size_t kMaxRank = 4;

    Shape() = default;
    Shape(std::initializer_list<std::size_t> dims);
    explicit Shape(std::vector<std::size_t> dims);

    std::size_t rank() const noexcept { return dims_.size(); }
    std::size_t operator[](std::size_t axis) const { return dims_.at(axis); }
    std::size_t back() const { return dims_.back(); }
    std::size_t numel() const noexcept { return numel_; }
    const std::vector<std::size_t>& dims() const noexcept { return dims_; }

    // Same shape with the last axis replaced.
    Shape with_last(std::size_t extent) const;

    bool operator==(const Shape& other) const noexcept { return dims_ == other.dims_; }

    std::string str() const;

  private:
    std::vector<std::size_t> dims_;
    std::size_t numel_ = 0;
};

// Plain row-major value buffer. Channel-last for spatial data: (y * w + x) * c + ch.
struct Tensor {
    Shape shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(Shape s) : shape(std::move(s)), data(shape.numel(), 0.0) {}
    Tensor(Shape s, std::vector<double> values);

    static Tensor zeros(Shape s) { return Tensor(std::move(s)); }
    static Tensor filled(Shape s, double value);

    std::size_t numel() const noexcept { return data.size(); }
    std::span<double> span() noexcept { return data; }
    std::span<const double> span() const noexcept { return data; }
};

bool all_finite(std::span<const double> values) noexcept;

}  // namespace scd
