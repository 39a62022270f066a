#pragma once

#include <string>
#include <vector>

#include "fedem/dataset.hpp"
#include "fedem/model.hpp"
#include "fedem/tensor.hpp"

namespace fedem {

/// One evaluation row in the reporting column order:
/// test_acc, val_acc, test_mse, fea_mse, ssim, psnr.
struct MetricReport {
  double test_acc = 0, val_acc = 0;
  double test_mse = 0, fea_mse = 0;
  double ssim = 0, psnr = 0;
};

/// Fraction of argmax-correct predictions; ties go to the lowest class.
/// Inputs are raw-pixel images; normalization is applied internally.
double accuracy(const ParameterSet& p, const NormalizationTransform& t, const Tensor& x_raw,
                const std::vector<int>& y);

/// Mean squared difference over all elements ([0,1] pixel space).
double mse(const Tensor& a, const Tensor& b);

/// MSE between penultimate-layer features of two raw-pixel images under
/// the given (usually final) model.
double feature_mse(const ParameterSet& p, const NormalizationTransform& t, const Tensor& a_raw,
                   const Tensor& b_raw);

/// Mean local structural similarity, 11x11 Gaussian window (sigma 1.5),
/// C1=(0.01)^2, C2=(0.03)^2 on the [0,1] scale; channels averaged. Images
/// smaller than the window fall back to one global window.
double ssim(const Tensor& a, const Tensor& b, std::size_t channels, std::size_t height,
            std::size_t width);

/// 10*log10(1/mse) with MAX=1; identical images give +infinity.
double psnr(const Tensor& a, const Tensor& b);

std::string metric_csv_header();
std::string metric_csv_row(const std::string& run, const std::string& dataset,
                           const std::string& method, const MetricReport& r);

/// Deterministic float formatting for every CSV the toolchain writes.
std::string format_double(double v);

}  // namespace fedem
