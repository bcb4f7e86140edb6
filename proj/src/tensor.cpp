#include "fpt/tensor.hpp"

#include <sstream>
#include <stdexcept>

namespace fpt {

std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (int d : s) {
        if (d <= 0) throw std::invalid_argument("tensor shape has nonpositive axis " + shape_str(s));
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << ',';
        os << s[i];
    }
    os << ']';
    return os.str();
}

Tensor::Tensor(Shape s, std::vector<double> v, bool rg)
    : shape(std::move(s)), value(std::move(v)), requires_grad(rg) {
    if (shape_numel(shape) != value.size())
        throw std::invalid_argument("tensor data length " + std::to_string(value.size()) +
                                    " does not match shape " + shape_str(shape));
}

void Tensor::ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
}

void Tensor::zero_grad() {
    if (!grad.empty()) grad.assign(value.size(), 0.0);
}

TensorPtr Tensor::zeros(Shape s, bool requires_grad) {
    auto n = shape_numel(s);
    return std::make_shared<Tensor>(std::move(s), std::vector<double>(n, 0.0), requires_grad);
}

TensorPtr Tensor::full(Shape s, double v, bool requires_grad) {
    auto n = shape_numel(s);
    return std::make_shared<Tensor>(std::move(s), std::vector<double>(n, v), requires_grad);
}

TensorPtr Tensor::from(Shape s, std::vector<double> data, bool requires_grad) {
    return std::make_shared<Tensor>(std::move(s), std::move(data), requires_grad);
}

TensorPtr Tensor::randn(Shape s, std::mt19937_64& rng, double stddev, bool requires_grad) {
    auto n = shape_numel(s);
    std::normal_distribution<double> dist(0.0, stddev);
    std::vector<double> v(n);
    for (auto& x : v) x = dist(rng);
    return std::make_shared<Tensor>(std::move(s), std::move(v), requires_grad);
}

TensorPtr Tensor::identity(int n) {
    auto t = zeros({n, n});
    for (int i = 0; i < n; ++i) t->value[static_cast<std::size_t>(i) * n + i] = 1.0;
    return t;
}

}  // namespace fpt
