#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <vector>

#include "edid/model.hpp"
#include "edid/simulate.hpp"

namespace edid {

struct CovarianceStructure {
    Eigen::MatrixXd C; // T x T symmetric
};

// Fully symmetric T x T x T tensor, stored dense.
class Tensor3 {
public:
    explicit Tensor3(int dim) : dim_(dim), v_(static_cast<size_t>(dim) * dim * dim, 0.0) {}
    int dim() const { return dim_; }
    double& at(int r, int s, int t) { return v_[idx(r, s, t)]; }
    double at(int r, int s, int t) const { return v_[idx(r, s, t)]; }
    double max_abs() const;

private:
    size_t idx(int r, int s, int t) const {
        return (static_cast<size_t>(r) * dim_ + s) * dim_ + t;
    }
    int dim_;
    std::vector<double> v_;
};

struct ThirdCumulantTensor {
    Tensor3 K;
};

// A Sigma_Theta A^T with block-diagonal Sigma_Theta.
CovarianceStructure implied_covariance(const EDModelSpec& spec);
// Same contraction given an explicit loading matrix and block diagonal;
// shared with the observational-equivalence constructor.
Eigen::MatrixXd covariance_from_loadings(const Eigen::MatrixXd& A,
                                         const Eigen::MatrixXd& sigma_theta);

// K_rst = sum over blocks of A[r,.]A[s,.]A[t,.] contracted with the block
// third-cumulant tensor.
ThirdCumulantTensor implied_third_cumulants(const EDModelSpec& spec);

CovarianceStructure empirical_covariance(const Panel& panel); // unbiased, n >= 2
// k-statistics: n/((n-1)(n-2)) sum of centered triple products, n >= 3
ThirdCumulantTensor empirical_third_cumulants(const Panel& panel);

// CSV exports; tensor rows are flattened r-major, then s, then t.
void write_covariance_csv(std::ostream& os, const CovarianceStructure& cov);
void write_tensor_csv(std::ostream& os, const ThirdCumulantTensor& tensor);

} // namespace edid
