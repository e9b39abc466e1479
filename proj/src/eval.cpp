#include "routecast/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>

#include "routecast/error.hpp"

namespace routecast {

namespace {

long long channel_pixels(const RasterLayout &layout)
{
    const auto m = layout.channel_mask();
    return std::accumulate(m.begin(), m.end(), 0LL);
}

std::string fmt(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

} // namespace

long long count_within(const ChannelUtilization &pred, const ChannelUtilization &truth, double tau)
{
    if (pred.cols != truth.cols || pred.rows != truth.rows)
        throw ValidationError("utilization dims differ");
    const auto p = pred.flat(), t = truth.flat();
    long long n = 0;
    for (size_t i = 0; i < p.size(); ++i)
        // Small slack so tau-sized steps that are exact in decimal still count.
        if (std::abs(static_cast<double>(p[i]) - t[i]) <= tau + 1e-6)
            ++n;
    return n;
}

AccuracyReport per_pixel_accuracy(const ImagePlane &pred_img, const ChannelUtilization &truth,
                                  const RasterLayout &layout, double tau)
{
    return per_pixel_accuracy(std::vector<ImagePlane>{pred_img}, std::vector<ChannelUtilization>{truth}, layout, tau);
}

AccuracyReport per_pixel_accuracy(const std::vector<ImagePlane> &pred_imgs,
                                  const std::vector<ChannelUtilization> &truths, const RasterLayout &layout, double tau)
{
    if (pred_imgs.size() != truths.size())
        throw ValidationError("prediction and truth counts differ");
    if (pred_imgs.empty())
        throw ValidationError("no images to evaluate");
    AccuracyReport r;
    r.tau = tau;
    long long base = 0;
    for (size_t i = 0; i < pred_imgs.size(); ++i) {
        const ChannelUtilization pred = decode_heatmap(pred_imgs[i], layout);
        const ChannelUtilization zero(truths[i].cols, truths[i].rows);
        const long long c = count_within(pred, truths[i], tau);
        const long long n = truths[i].num_segments();
        r.correct += c;
        r.n_segments += n;
        base += count_within(zero, truths[i], tau);
        r.per_image.push_back(static_cast<double>(c) / static_cast<double>(n));
    }
    r.n_channel_pixels = channel_pixels(layout) * static_cast<long long>(pred_imgs.size());
    r.per_pixel_acc = static_cast<double>(r.correct) / static_cast<double>(r.n_segments);
    r.baseline_acc = static_cast<double>(base) / static_cast<double>(r.n_segments);
    return r;
}

std::vector<std::string> topk_ids(const ScoreList &scores, int k)
{
    if (k < 1)
        throw ValidationError("k must be >= 1");
    if (static_cast<int>(scores.size()) < k)
        throw ValidationError("need at least " + std::to_string(k) + " candidates, got " +
                              std::to_string(scores.size()));
    std::set<std::string> ids;
    for (const auto &[id, s] : scores)
        if (!ids.insert(id).second)
            throw ValidationError("duplicate candidate id '" + id + "'");
    ScoreList sorted = scores;
    std::sort(sorted.begin(), sorted.end(), [](const auto &a, const auto &b) {
        return a.second != b.second ? a.second < b.second : a.first < b.first;
    });
    std::vector<std::string> out;
    for (int i = 0; i < k; ++i)
        out.push_back(sorted[i].first);
    return out;
}

RankingReport topk_overlap(const ScoreList &predicted, const ScoreList &truth, int k)
{
    RankingReport r;
    r.k = k;
    r.selected = topk_ids(predicted, k);
    r.true_topk = topk_ids(truth, k);
    const std::set<std::string> t(r.true_topk.begin(), r.true_topk.end());
    int hit = 0;
    for (const auto &id : r.selected)
        hit += static_cast<int>(t.count(id));
    r.overlap = static_cast<double>(hit) / k;
    return r;
}

Objective parse_objective(const std::string &s)
{
    std::vector<std::string> parts;
    size_t start = 0;
    while (true) {
        const size_t p = s.find(':', start);
        parts.push_back(s.substr(start, p == std::string::npos ? std::string::npos : p - start));
        if (p == std::string::npos)
            break;
        start = p + 1;
    }
    if (parts.size() > 3)
        throw ValidationError("bad objective '" + s + "' (expected min|max[:mode][:region])");
    Objective o;
    if (parts[0] == "max")
        o.maximize = true;
    else if (parts[0] != "min")
        throw ValidationError("objective must start with min or max, got '" + parts[0] + "'");
    if (parts.size() > 1)
        o.mode = parse_score_mode(parts[1]);
    if (parts.size() > 2)
        o.region = parts[2];
    return o;
}

std::vector<RankedItem> explore(const std::vector<ExploreItem> &items, const Objective &obj, const Floorplan &fp,
                                const RasterLayout &layout)
{
    if (items.empty())
        throw ValidationError("explore: no candidates");
    const auto region = named_region(obj.region, fp);
    if (!region)
        throw ValidationError("unknown region '" + obj.region + "'");
    std::vector<RankedItem> out;
    for (const auto &it : items)
        out.push_back({it.id, congestion_score(decode_heatmap(it.pred, layout), region, obj.mode)});
    std::sort(out.begin(), out.end(), [&](const RankedItem &a, const RankedItem &b) {
        if (a.score != b.score)
            return obj.maximize ? a.score > b.score : a.score < b.score;
        return a.id < b.id;
    });
    return out;
}

VariantSpec variant_spec(const std::string &name)
{
    VariantSpec v;
    v.name = name;
    if (name == "l1_all")
        return v;
    if (name == "no_l1")
        v.use_l1 = false;
    else if (name == "single_skip")
        v.skip = SkipMode::Single;
    else if (name == "no_skip")
        v.skip = SkipMode::None;
    else if (name == "grayscale")
        v.grayscale = true;
    else
        throw ValidationError("unknown variant '" + name + "' (l1_all, no_l1, single_skip, no_skip, grayscale)");
    return v;
}

std::vector<AblationRow> ablation_compare(const std::vector<AblationVariant> &variants,
                                          const std::vector<HoldoutItem> &holdout, const RasterLayout &layout,
                                          double tau)
{
    if (holdout.empty())
        throw ValidationError("ablation: empty holdout set");
    std::vector<AblationRow> rows;
    for (const auto &v : variants) {
        if (v.model->g_cfg.image_size != layout.w)
            throw ValidationError("variant " + v.name + " was trained at w = " +
                                  std::to_string(v.model->g_cfg.image_size) + ", layout has w = " +
                                  std::to_string(layout.w));
        AblationRow row;
        row.name = v.name;
        row.final_losses = v.model->last;
        row.loss_curve = v.loss_curve;
        std::vector<ImagePlane> preds;
        std::vector<ChannelUtilization> truths;
        double l1 = 0;
        size_t n = 0;
        for (const auto &h : holdout) {
            const ImagePlane pred = to_image(infer(*v.model, build_input(h.place, h.connect, v.model->t_cfg)));
            for (size_t i = 0; i < pred.data().size(); ++i)
                l1 += std::abs(static_cast<double>(pred.data()[i]) - h.truth.data()[i]);
            n += pred.data().size();
            preds.push_back(pred);
            truths.push_back(h.util);
        }
        row.val_l1 = l1 / static_cast<double>(n);
        row.acc = per_pixel_accuracy(preds, truths, layout, tau);
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string ablation_csv(const std::vector<AblationRow> &rows)
{
    std::string out = "variant,per_pixel_acc,baseline_acc,val_l1,d_loss,g_adv,g_l1,loss_curve\n";
    for (const auto &r : rows)
        out += r.name + "," + fmt(r.acc.per_pixel_acc) + "," + fmt(r.acc.baseline_acc) + "," + fmt(r.val_l1) + "," +
               fmt(r.final_losses.d_loss) + "," + fmt(r.final_losses.g_adv) + "," + fmt(r.final_losses.g_l1) + "," +
               r.loss_curve + "\n";
    return out;
}

nlohmann::ordered_json ablation_json(const std::vector<AblationRow> &rows)
{
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto &r : rows)
        j.push_back({{"variant", r.name},
                     {"per_pixel_acc", r.acc.per_pixel_acc},
                     {"baseline_acc", r.acc.baseline_acc},
                     {"tau", r.acc.tau},
                     {"n_segments", r.acc.n_segments},
                     {"per_image", r.acc.per_image},
                     {"val_l1", r.val_l1},
                     {"final_losses",
                      {{"d_loss", r.final_losses.d_loss},
                       {"g_adv", r.final_losses.g_adv},
                       {"g_l1", r.final_losses.g_l1}}},
                     {"loss_curve", r.loss_curve}});
    return j;
}

} // namespace routecast
