#include "mrbench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "mrbench/error.hpp"
#include "mrbench/parallel.hpp"

namespace mrb {

namespace {

void require_same_dims(const MagnitudeVolume &gt, const MagnitudeVolume &pred)
{
  if (gt.nslices != pred.nslices || gt.height != pred.height || gt.width != pred.width ||
      gt.data.size() != pred.data.size()) {
    throw Error(ErrorCode::ShapeMismatch, "volume dims differ (" + gt.attrs.case_id + ")");
  }
}

double volume_max(const MagnitudeVolume &v)
{
  double m = 0.0;
  for (float x : v.data) {
    m = std::max(m, static_cast<double>(x));
  }
  return m;
}

double mse(const MagnitudeVolume &gt, const MagnitudeVolume &pred)
{
  double acc = 0.0;
  for (std::size_t i = 0; i < gt.data.size(); ++i) {
    double d = static_cast<double>(gt.data[i]) - static_cast<double>(pred.data[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(gt.data.size());
}

// Window sums of a (height x width) field over every valid kSsimWindow^2 position.
std::vector<double> box_sums(const std::vector<double> &field, std::size_t height, std::size_t width)
{
  std::size_t const w = kSsimWindow;
  std::size_t const oh = height - w + 1;
  std::size_t const ow = width - w + 1;
  std::vector<double> rows(height * ow);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t k = 0; k < w; ++k) {
        s += field[y * width + x + k];
      }
      rows[y * ow + x] = s;
    }
  }
  std::vector<double> out(oh * ow);
  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t k = 0; k < w; ++k) {
        s += rows[(y + k) * ow + x];
      }
      out[y * ow + x] = s;
    }
  }
  return out;
}

} // namespace

double nmse(const MagnitudeVolume &gt, const MagnitudeVolume &pred)
{
  require_same_dims(gt, pred);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < gt.data.size(); ++i) {
    double const g = gt.data[i];
    double const d = g - static_cast<double>(pred.data[i]);
    num += d * d;
    den += g * g;
  }
  if (den == 0.0) {
    throw Error(ErrorCode::DegenerateReference, "reference volume is all zero (" + gt.attrs.case_id + ")");
  }
  return num / den;
}

double psnr(const MagnitudeVolume &gt, const MagnitudeVolume &pred)
{
  require_same_dims(gt, pred);
  double const err = mse(gt, pred);
  if (err == 0.0) {
    return kPsnrCapDb;
  }
  double const range = volume_max(gt);
  if (range <= 0.0) {
    throw Error(ErrorCode::DegenerateReference, "reference volume has zero peak (" + gt.attrs.case_id + ")");
  }
  return std::min(kPsnrCapDb, 20.0 * std::log10(range) - 10.0 * std::log10(err));
}

double ssim_slice(std::span<const float> gt, std::span<const float> pred, std::size_t height, std::size_t width,
                  double data_range)
{
  if (height < kSsimWindow || width < kSsimWindow) {
    throw Error(ErrorCode::WindowTooLarge, "slice smaller than the 7x7 SSIM window");
  }
  if (data_range <= 0.0) {
    throw Error(ErrorCode::DegenerateReference, "SSIM data range must be positive");
  }
  std::size_t const n = height * width;
  std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = gt[i];
    y[i] = pred[i];
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  auto sx = box_sums(x, height, width);
  auto sy = box_sums(y, height, width);
  auto sxx = box_sums(xx, height, width);
  auto syy = box_sums(yy, height, width);
  auto sxy = box_sums(xy, height, width);

  double const np = static_cast<double>(kSsimWindow * kSsimWindow);
  double const cov_norm = np / (np - 1.0);
  double const c1 = (kSsimK1 * data_range) * (kSsimK1 * data_range);
  double const c2 = (kSsimK2 * data_range) * (kSsimK2 * data_range);
  double total = 0.0;
  for (std::size_t i = 0; i < sx.size(); ++i) {
    double const ux = sx[i] / np;
    double const uy = sy[i] / np;
    double const vx = cov_norm * (sxx[i] / np - ux * ux);
    double const vy = cov_norm * (syy[i] / np - uy * uy);
    double const vxy = cov_norm * (sxy[i] / np - ux * uy);
    total += ((2.0 * ux * uy + c1) * (2.0 * vxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
  }
  return total / static_cast<double>(sx.size());
}

double ssim(const MagnitudeVolume &gt, const MagnitudeVolume &pred)
{
  require_same_dims(gt, pred);
  if (gt.height < kSsimWindow || gt.width < kSsimWindow) {
    throw Error(ErrorCode::WindowTooLarge, "slice smaller than the 7x7 SSIM window");
  }
  double const range = volume_max(gt);
  double total = 0.0;
  for (std::size_t s = 0; s < gt.nslices; ++s) {
    total += ssim_slice(gt.slice(s), pred.slice(s), gt.height, gt.width, range);
  }
  return total / static_cast<double>(gt.nslices);
}

MetricValues score_volume(const MagnitudeVolume &gt, const MagnitudeVolume &pred)
{
  MetricValues v;
  v.nmse = nmse(gt, pred);
  v.psnr = psnr(gt, pred);
  v.ssim = ssim(gt, pred);
  v.n_volumes = 1;
  return v;
}

MetricReport MetricReport::aggregate(std::vector<VolumeScore> volumes)
{
  std::sort(volumes.begin(), volumes.end(),
            [](const VolumeScore &a, const VolumeScore &b) { return a.case_id < b.case_id; });
  MetricReport r;
  auto add = [](MetricValues &acc, const MetricValues &v) {
    acc.nmse += v.nmse;
    acc.psnr += v.psnr;
    acc.ssim += v.ssim;
    acc.n_volumes += 1;
  };
  auto finish = [](MetricValues &acc) {
    if (acc.n_volumes > 0) {
      double const n = static_cast<double>(acc.n_volumes);
      acc.nmse /= n;
      acc.psnr /= n;
      acc.ssim /= n;
    }
  };
  for (const auto &v : volumes) {
    add(r.overall, v.values);
    add(r.per_contrast[v.contrast], v.values);
  }
  finish(r.overall);
  for (auto &[c, acc] : r.per_contrast) {
    finish(acc);
  }
  r.volumes = std::move(volumes);
  return r;
}

namespace {

Json values_json(const MetricValues &v)
{
  return {{"nmse", v.nmse}, {"psnr", v.psnr}, {"ssim", v.ssim}, {"n_volumes", v.n_volumes}};
}

MetricValues values_from_json(const Json &j)
{
  MetricValues v;
  v.nmse = j.at("nmse").get<double>();
  v.psnr = j.at("psnr").get<double>();
  v.ssim = j.at("ssim").get<double>();
  v.n_volumes = j.value("n_volumes", std::size_t{0});
  return v;
}

} // namespace

Json MetricReport::to_json() const
{
  Json j = values_json(overall);
  Json pc = Json::object();
  for (Contrast c : {Contrast::PD, Contrast::PDFS}) {
    auto it = per_contrast.find(c);
    pc[to_string(c)] = it == per_contrast.end() ? Json(nullptr) : values_json(it->second);
  }
  j["per_contrast"] = pc;
  Json vols = Json::array();
  for (const auto &v : volumes) {
    Json e = values_json(v.values);
    e.erase("n_volumes");
    e["case_id"] = v.case_id;
    e["contrast"] = to_string(v.contrast);
    vols.push_back(e);
  }
  j["per_volume"] = vols;
  return j;
}

MetricReport MetricReport::from_json(const Json &j)
{
  MetricReport r;
  r.overall = values_from_json(j);
  if (j.contains("per_contrast")) {
    for (auto &[name, v] : j.at("per_contrast").items()) {
      if (!v.is_null()) {
        r.per_contrast[contrast_from_string(name)] = values_from_json(v);
      }
    }
  }
  if (j.contains("per_volume")) {
    for (const auto &e : j.at("per_volume")) {
      VolumeScore s;
      s.case_id = e.at("case_id").get<std::string>();
      s.contrast = contrast_from_string(e.at("contrast").get<std::string>());
      s.values = values_from_json(e);
      s.values.n_volumes = 1;
      r.volumes.push_back(s);
    }
  }
  return r;
}

MetricReport score_volume_set(const std::vector<MagnitudeVolume> &gt_cases,
                              const std::vector<MagnitudeVolume> &pred_cases, unsigned jobs)
{
  std::map<std::string, const MagnitudeVolume *> preds;
  for (const auto &p : pred_cases) {
    if (!preds.emplace(p.attrs.case_id, &p).second) {
      throw Error(ErrorCode::SubmissionIncomplete, "duplicate prediction for " + p.attrs.case_id);
    }
  }
  std::set<std::string> gt_ids;
  for (const auto &g : gt_cases) {
    gt_ids.insert(g.attrs.case_id);
    if (!preds.count(g.attrs.case_id)) {
      throw Error(ErrorCode::SubmissionIncomplete, "missing prediction for " + g.attrs.case_id);
    }
  }
  for (const auto &[id, p] : preds) {
    if (!gt_ids.count(id)) {
      throw Error(ErrorCode::SubmissionIncomplete, "unexpected prediction for " + id);
    }
  }
  std::vector<VolumeScore> scores(gt_cases.size());
  parallel_for(gt_cases.size(), jobs, [&](std::size_t i) {
    const auto &g = gt_cases[i];
    scores[i] = VolumeScore{g.attrs.case_id, g.attrs.contrast, score_volume(g, *preds.at(g.attrs.case_id))};
  });
  return MetricReport::aggregate(std::move(scores));
}

} // namespace mrb
