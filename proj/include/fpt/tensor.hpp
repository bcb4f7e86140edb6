#pragma once

#include <cstddef>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace fpt {

using Shape = std::vector<int>;

std::size_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

// Dense row-major tensor of 64-bit floats. `grad` stays empty until the
// backward pass touches the tensor; frozen leaves (requires_grad == false)
// never get one.
class Tensor {
public:
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    bool requires_grad = false;

    Tensor() = default;
    Tensor(Shape s, std::vector<double> v, bool rg);

    std::size_t numel() const { return value.size(); }
    void ensure_grad();
    void zero_grad();

    static std::shared_ptr<Tensor> zeros(Shape s, bool requires_grad = false);
    static std::shared_ptr<Tensor> full(Shape s, double v, bool requires_grad = false);
    static std::shared_ptr<Tensor> from(Shape s, std::vector<double> data,
                                        bool requires_grad = false);
    static std::shared_ptr<Tensor> randn(Shape s, std::mt19937_64& rng, double stddev,
                                         bool requires_grad = false);
    static std::shared_ptr<Tensor> identity(int n);
};

using TensorPtr = std::shared_ptr<Tensor>;

}  // namespace fpt
