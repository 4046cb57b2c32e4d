#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mrbench/types.hpp"

namespace mrb {

inline constexpr double kPsnrCapDb = 200.0;
inline constexpr std::size_t kSsimWindow = 7;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;

// ||gt - pred||^2 / ||gt||^2 over the whole volume.
double nmse(const MagnitudeVolume &gt, const MagnitudeVolume &pred);

// 20 log10(max gt) - 10 log10(MSE); identical volumes report kPsnrCapDb.
double psnr(const MagnitudeVolume &gt, const MagnitudeVolume &pred);

// Mean over slices of the mean SSIM over every valid 7x7 window position,
// with K1 = 0.01, K2 = 0.03, data range = max of the gt volume and the
// unbiased (N - 1) window covariance.
double ssim(const MagnitudeVolume &gt, const MagnitudeVolume &pred);

// One slice with an explicit data range.
double ssim_slice(std::span<const float> gt, std::span<const float> pred, std::size_t height, std::size_t width,
                  double data_range);

struct MetricValues {
  double nmse = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
  std::size_t n_volumes = 0;
};

struct VolumeScore {
  std::string case_id;
  Contrast contrast = Contrast::PD;
  MetricValues values;
};

// Unweighted means over per-volume scores, overall and per contrast.
struct MetricReport {
  MetricValues overall;
  std::map<Contrast, MetricValues> per_contrast;
  std::vector<VolumeScore> volumes;

  Json to_json() const;
  static MetricReport from_json(const Json &j);
  static MetricReport aggregate(std::vector<VolumeScore> volumes);
};

MetricValues score_volume(const MagnitudeVolume &gt, const MagnitudeVolume &pred);

// gt and pred are matched by attrs.case_id; contrast is taken from gt.
MetricReport score_volume_set(const std::vector<MagnitudeVolume> &gt_cases,
                              const std::vector<MagnitudeVolume> &pred_cases, unsigned jobs = 1);

} // namespace mrb
