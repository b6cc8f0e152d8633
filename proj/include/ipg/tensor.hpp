#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ipg {

// Dense row-major tensor of doubles; the single numeric carrier for inputs,
// activations, parameters and gradients. Shape is fixed at construction.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape);
    Tensor(std::vector<int> shape, std::vector<double> data);

    static Tensor scalar(double v);
    static std::int64_t numel(const std::vector<int>& shape);

    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    double& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
    double operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    void fill(double v);
    bool all_finite() const;

    bool operator==(const Tensor& other) const {
        return shape_ == other.shape_ && data_ == other.data_;
    }

private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

// NaN/Inf anywhere is a hard error, never silent propagation.
void ensure_finite(const Tensor& t, const std::string& context);
void ensure_finite(double v, const std::string& context);

std::string shape_to_string(const std::vector<int>& shape);

}  // namespace ipg
