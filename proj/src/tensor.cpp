#include "scd/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "scd/error.hpp"

namespace scd {

Shape::Shape(std::initializer_list<std::size_t> dims) : Shape(std::vector<std::size_t>(dims)) {}

Shape::Shape(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
    if (dims_.empty() || dims_.size() > kMaxRank) {
        throw ShapeError("rank must be 1.." + std::to_string(kMaxRank) + ", got " +
                         std::to_string(dims_.size()));
    }
    numel_ = 1;
    for (std::size_t d : dims_) {
        if (d == 0) throw ShapeError("zero extent in " + str());
        if (numel_ > std::numeric_limits<std::size_t>::max() / d) {
            throw ShapeError("element count overflows in " + str());
        }
        numel_ *= d;
    }
}

Shape Shape::with_last(std::size_t extent) const {
    auto dims = dims_;
    dims.back() = extent;
    return Shape(std::move(dims));
}

std::string Shape::str() const {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < dims_.size(); ++i) {
        if (i) out << 'x';
        out << dims_[i];
    }
    out << ']';
    return out.str();
}

Tensor::Tensor(Shape s, std::vector<double> values) : shape(std::move(s)), data(std::move(values)) {
    if (data.size() != shape.numel()) {
        throw ShapeError("buffer of " + std::to_string(data.size()) + " elements for shape " +
                         shape.str());
    }
}

Tensor Tensor::filled(Shape s, double value) {
    Tensor t(std::move(s));
    std::fill(t.data.begin(), t.data.end(), value);
    return t;
}

bool all_finite(std::span<const double> values) noexcept {
    for (double v : values) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

}  // namespace scd
