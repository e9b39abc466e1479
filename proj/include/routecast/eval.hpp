#pragma once

#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "routecast/cgan.hpp"
#include "routecast/raster.hpp"
#include "routecast/router.hpp"

namespace routecast {

inline constexpr double kDefaultTau = 0.1;

// Segment-level accuracy of decoded predictions. A segment counts as correct
// when |u_pred - u_truth| <= tau; the baseline predicts zero everywhere.
struct AccuracyReport {
    double per_pixel_acc = 0;
    double baseline_acc = 0;
    double tau = kDefaultTau;
    long long correct = 0;
    long long n_segments = 0;
    long long n_channel_pixels = 0;
    std::vector<double> per_image;
};

long long count_within(const ChannelUtilization &pred, const ChannelUtilization &truth, double tau);

AccuracyReport per_pixel_accuracy(const ImagePlane &pred_img, const ChannelUtilization &truth,
                                  const RasterLayout &layout, double tau = kDefaultTau);
// Pooled over images: total correct / total segments.
AccuracyReport per_pixel_accuracy(const std::vector<ImagePlane> &pred_imgs,
                                  const std::vector<ChannelUtilization> &truths, const RasterLayout &layout,
                                  double tau = kDefaultTau);

using ScoreList = std::vector<std::pair<std::string, double>>;

struct RankingReport {
    int k = 0;
    std::vector<std::string> selected;
    std::vector<std::string> true_topk;
    double overlap = 0;
};

// The k smallest scores, ties broken by id ascending.
std::vector<std::string> topk_ids(const ScoreList &scores, int k);
// |topk(pred) & topk(truth)| / k. Throws ValidationError with fewer than k
// candidates or duplicate ids.
RankingReport topk_overlap(const ScoreList &predicted, const ScoreList &truth, int k = 10);

struct Objective {
    bool maximize = false;
    ScoreMode mode = ScoreMode::Mean;
    std::string region = "all";
};

// "min|max[:mean|max|p95][:region]", e.g. "min", "max:p95", "min:mean:upper".
Objective parse_objective(const std::string &s);

struct ExploreItem {
    std::string id;
    ImagePlane pred;
};

struct RankedItem {
    std::string id;
    double score = 0;
};

// Scores each prediction by decode + congestion_score and sorts best first
// (ties by id).
std::vector<RankedItem> explore(const std::vector<ExploreItem> &items, const Objective &obj, const Floorplan &fp,
                                const RasterLayout &layout);

// Named training variants compared by the ablation study: "l1_all"
// (reference), "no_l1", "single_skip", "no_skip", "grayscale".
struct VariantSpec {
    std::string name;
    SkipMode skip = SkipMode::All;
    bool use_l1 = true;
    bool grayscale = false;
};
VariantSpec variant_spec(const std::string &name);

struct HoldoutItem {
    std::string id;
    ImagePlane place;   // RGB placement image
    ImagePlane connect; // connectivity image
    ImagePlane truth;   // rendered route image
    ChannelUtilization util;
};

struct AblationVariant {
    std::string name;
    Model *model;
    std::string loss_curve; // path of the variant's step,d_loss,g_adv,g_l1 CSV, may be empty
};

struct AblationRow {
    std::string name;
    AccuracyReport acc;
    double val_l1 = 0; // mean |infer(x) - truth| over holdout pixels
    StepLosses final_losses;
    std::string loss_curve;
};

std::vector<AblationRow> ablation_compare(const std::vector<AblationVariant> &variants,
                                          const std::vector<HoldoutItem> &holdout, const RasterLayout &layout,
                                          double tau = kDefaultTau);
std::string ablation_csv(const std::vector<AblationRow> &rows);
nlohmann::ordered_json ablation_json(const std::vector<AblationRow> &rows);

} // namespace routecast
