#include "fedem/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace fedem {

double accuracy(const ParameterSet& p, const NormalizationTransform& t, const Tensor& x_raw,
                const std::vector<int>& y) {
  if (y.empty()) throw std::invalid_argument("accuracy: empty evaluation set");
  const std::size_t hw = p.spec.height * p.spec.width;
  Tensor logits = logits_eager(p, normalize_eager(t, x_raw, p.spec.channels, hw));
  std::size_t hits = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < logits.cols(); ++j)
      if (logits.at(i, j) > logits.at(i, best)) best = j;  // ties keep the lowest index
    if (static_cast<int>(best) == y[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(y.size());
}

double mse(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b))
    throw ShapeError("mse: shapes " + shape_str(a.shape) + " vs " + shape_str(b.shape));
  double s = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const double d = a.data[i] - b.data[i];
    s += d * d;
  }
  return s / static_cast<double>(a.numel());
}

double feature_mse(const ParameterSet& p, const NormalizationTransform& t, const Tensor& a_raw,
                   const Tensor& b_raw) {
  const std::size_t hw = p.spec.height * p.spec.width;
  Tensor fa = penultimate_features(p, normalize_eager(t, a_raw, p.spec.channels, hw));
  Tensor fb = penultimate_features(p, normalize_eager(t, b_raw, p.spec.channels, hw));
  return mse(fa, fb);
}

namespace {

// 11x11 Gaussian window, sigma 1.5, normalized to sum 1.
std::vector<double> gaussian_window(std::size_t side, double sigma) {
  std::vector<double> w(side * side);
  const double half = (static_cast<double>(side) - 1.0) / 2.0;
  double total = 0.0;
  for (std::size_t i = 0; i < side; ++i)
    for (std::size_t j = 0; j < side; ++j) {
      const double di = static_cast<double>(i) - half, dj = static_cast<double>(j) - half;
      w[i * side + j] = std::exp(-(di * di + dj * dj) / (2.0 * sigma * sigma));
      total += w[i * side + j];
    }
  for (double& v : w) v /= total;
  return w;
}

// Weighted SSIM over one window; `stride` is the row pitch of the images
// and `wh`/`ww` the window extents (11x11 Gaussian, or the whole image for
// the small-image fallback).
double ssim_window(const double* a, const double* b, std::size_t stride,
                   const std::vector<double>& w, std::size_t wh, std::size_t ww) {
  constexpr double kC1 = 0.01 * 0.01, kC2 = 0.03 * 0.03;
  double mu_a = 0, mu_b = 0;
  for (std::size_t i = 0; i < wh; ++i)
    for (std::size_t j = 0; j < ww; ++j) {
      const double wt = w[i * ww + j];
      mu_a += wt * a[i * stride + j];
      mu_b += wt * b[i * stride + j];
    }
  double var_a = 0, var_b = 0, cov = 0;
  for (std::size_t i = 0; i < wh; ++i)
    for (std::size_t j = 0; j < ww; ++j) {
      const double wt = w[i * ww + j];
      const double da = a[i * stride + j] - mu_a, db = b[i * stride + j] - mu_b;
      var_a += wt * da * da;
      var_b += wt * db * db;
      cov += wt * da * db;
    }
  return ((2 * mu_a * mu_b + kC1) * (2 * cov + kC2)) /
         ((mu_a * mu_a + mu_b * mu_b + kC1) * (var_a + var_b + kC2));
}

}  // namespace

double ssim(const Tensor& a, const Tensor& b, std::size_t channels, std::size_t height,
            std::size_t width) {
  if (!a.same_shape(b))
    throw ShapeError("ssim: shapes " + shape_str(a.shape) + " vs " + shape_str(b.shape));
  if (a.numel() != channels * height * width)
    throw ShapeError("ssim: geometry does not match tensor size");

  const bool windowed = height >= 11 && width >= 11;
  const std::size_t wh = windowed ? 11 : height, ww = windowed ? 11 : width;
  std::vector<double> w;
  if (windowed)
    w = gaussian_window(11, 1.5);
  else
    w.assign(wh * ww, 1.0 / static_cast<double>(wh * ww));

  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t c = 0; c < channels; ++c) {
    const double* pa = &a.data[c * height * width];
    const double* pb = &b.data[c * height * width];
    for (std::size_t i = 0; i + wh <= height; ++i)
      for (std::size_t j = 0; j + ww <= width; ++j) {
        total += ssim_window(pa + i * width + j, pb + i * width + j, width, w, wh, ww);
        ++count;
      }
  }
  return total / static_cast<double>(count);
}

double psnr(const Tensor& a, const Tensor& b) {
  const double m = mse(a, b);
  if (m == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / m);
}

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string metric_csv_header() {
  return "run,dataset,method,test_acc,val_acc,test_mse,fea_mse,ssim,psnr";
}

std::string metric_csv_row(const std::string& run, const std::string& dataset,
                           const std::string& method, const MetricReport& r) {
  std::ostringstream os;
  os << run << ',' << dataset << ',' << method << ',' << format_double(r.test_acc) << ','
     << format_double(r.val_acc) << ',' << format_double(r.test_mse) << ','
     << format_double(r.fea_mse) << ',' << format_double(r.ssim) << ',' << format_double(r.psnr);
  return os.str();
}

}  // namespace fedem
