#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/poisson_distribution.hpp>
#include <nlohmann/json.hpp>

#include "fcp/error.hpp"
#include "fcp/filters.hpp"
#include "fcp/image.hpp"
#include "fcp/msd.hpp"
#include "fcp/rng.hpp"

namespace fcp {

struct PoissonField {
    double lambda0 = 0.0;
    friend bool operator==(const PoissonField&, const PoissonField&) = default;
};

struct GaussianField {
    double mu = 0.0;
    double sigma = 1.0;
    friend bool operator==(const GaussianField&, const GaussianField&) = default;
};

using BaseField = std::variant<PoissonField, GaussianField>;

namespace stage {
struct Smooth {
    double sigma = 1.0;
    friend bool operator==(const Smooth&, const Smooth&) = default;
};
struct Sqrt {
    friend bool operator==(const Sqrt&, const Sqrt&) = default;
};
struct ZScore {
    double mu0 = 0.0;
    double sigma0 = 1.0;
    friend bool operator==(const ZScore&, const ZScore&) = default;
};
struct Msd {
    std::vector<double> scales{1.0, 2.0, 4.0, 8.0};
    friend bool operator==(const Msd&, const Msd&) = default;
};
struct Negate {
    friend bool operator==(const Negate&, const Negate&) = default;
};
} // namespace stage

using Stage = std::variant<stage::Smooth, stage::Sqrt, stage::ZScore, stage::Msd, stage::Negate>;

inline std::string describe(const Stage& s)
{
    std::ostringstream out;
    std::visit(
        [&](const auto& st) {
            using S = std::decay_t<decltype(st)>;
            if constexpr (std::is_same_v<S, stage::Smooth>) out << "smooth(" << st.sigma << ")";
            else if constexpr (std::is_same_v<S, stage::Sqrt>) out << "sqrt";
            else if constexpr (std::is_same_v<S, stage::ZScore>)
                out << "zscore(" << st.mu0 << "," << st.sigma0 << ")";
            else if constexpr (std::is_same_v<S, stage::Msd>) {
                out << "msd(";
                for (std::size_t i = 0; i < st.scales.size(); ++i) out << (i ? "," : "") << st.scales[i];
                out << ")";
            } else out << "negate";
        },
        s);
    return out.str();
}

/// Null-field distribution: a base field followed by an ordered filter
/// pipeline. An empty pipeline is the bare field; a nonempty one is the
/// filtered model, simulated by applying each stage to the base sample.
struct NoiseModel {
    BaseField base = PoissonField{};
    std::vector<Stage> stages;

    friend bool operator==(const NoiseModel&, const NoiseModel&) = default;

    /// Throws ModelError/ParameterError if the base parameters or the stage
    /// composition are invalid.
    void validate() const
    {
        bool nonnegative = std::visit(
            [](const auto& b) {
                using B = std::decay_t<decltype(b)>;
                if constexpr (std::is_same_v<B, PoissonField>) {
                    if (!(b.lambda0 >= 0.0) || !std::isfinite(b.lambda0))
                        throw ModelError("PoissonField requires lambda0 >= 0");
                    return true;
                } else {
                    if (!(b.sigma > 0.0) || !std::isfinite(b.sigma) || !std::isfinite(b.mu))
                        throw ModelError("GaussianField requires finite mu and sigma > 0");
                    return false;
                }
            },
            base);
        for (std::size_t i = 0; i < stages.size(); ++i) {
            std::visit(
                [&](const auto& st) {
                    using S = std::decay_t<decltype(st)>;
                    if constexpr (std::is_same_v<S, stage::Smooth>) {
                        if (!(st.sigma > 0.0)) throw ModelError("smooth stage needs sigma > 0");
                    } else if constexpr (std::is_same_v<S, stage::Sqrt>) {
                        if (!nonnegative)
                            throw ModelError("sqrt stage " + std::to_string(i) +
                                             " follows a stage that can produce negative values");
                    } else if constexpr (std::is_same_v<S, stage::ZScore>) {
                        if (!(st.sigma0 > 0.0)) throw ModelError("zscore stage needs sigma0 > 0");
                        nonnegative = false;
                    } else if constexpr (std::is_same_v<S, stage::Msd>) {
                        try {
                            ScaleGrid check(st.scales);
                        } catch (const ParameterError& e) {
                            throw ModelError(std::string("msd stage: ") + e.what());
                        }
                        nonnegative = false;
                    } else {
                        nonnegative = false;
                    }
                },
                stages[i]);
        }
    }
};

inline NoiseModel poisson_model(double lambda0, std::vector<Stage> stages = {})
{
    return {PoissonField{lambda0}, std::move(stages)};
}

inline NoiseModel gaussian_model(double mu, double sigma, std::vector<Stage> stages = {})
{
    return {GaussianField{mu, sigma}, std::move(stages)};
}

/// A stage list prepared for one image shape. The same object filters the
/// observed data and every simulated null image, which keeps the two paths
/// identical by construction.
class StagePipeline {
public:
    StagePipeline(std::size_t rows, std::size_t cols, std::vector<Stage> stages)
        : rows_(rows), cols_(cols), stages_(std::move(stages))
    {
        for (const auto& s : stages_) {
            if (const auto* m = std::get_if<stage::Msd>(&s)) {
                banks_.push_back(std::make_unique<MsdFilterBank>(rows, cols, ScaleGrid(m->scales)));
            } else if (const auto* sm = std::get_if<stage::Smooth>(&s)) {
                taps_.push_back(gaussian_taps(sm->sigma));
            }
        }
    }

    [[nodiscard]] const std::vector<Stage>& stages() const noexcept { return stages_; }

    ImageGrid apply(ImageGrid img)
    {
        if (img.rows() != rows_ || img.cols() != cols_)
            throw StructuralError("StagePipeline applied to an image of the wrong shape");
        std::size_t bank = 0;
        std::size_t smooth = 0;
        for (const auto& s : stages_) {
            std::visit(
                [&](const auto& st) {
                    using S = std::decay_t<decltype(st)>;
                    if constexpr (std::is_same_v<S, stage::Smooth>) {
                        img = convolve_separable(img, taps_[smooth], taps_[smooth]);
                        ++smooth;
                    } else if constexpr (std::is_same_v<S, stage::Sqrt>) {
                        img = sqrt_transform(img);
                    } else if constexpr (std::is_same_v<S, stage::ZScore>) {
                        img = z_score(img, st.mu0, st.sigma0);
                    } else if constexpr (std::is_same_v<S, stage::Msd>) {
                        img = banks_[bank++]->min_image(img);
                    } else {
                        img = detection_statistic(img);
                    }
                },
                s);
        }
        return img;
    }

private:
    std::size_t rows_, cols_;
    std::vector<Stage> stages_;
    std::vector<std::vector<double>> taps_;
    std::vector<std::unique_ptr<MsdFilterBank>> banks_;
};

/// Draws one unfiltered sample of the base field.
inline ImageGrid sample_base_field(const BaseField& base, std::size_t rows, std::size_t cols,
                                   Engine& eng)
{
    ImageGrid img(rows, cols);
    std::visit(
        [&](const auto& b) {
            using B = std::decay_t<decltype(b)>;
            if constexpr (std::is_same_v<B, PoissonField>) {
                if (b.lambda0 == 0.0) return;
                boost::random::poisson_distribution<int, double> dist(b.lambda0);
                for (double& v : img.values()) v = static_cast<double>(dist(eng));
            } else {
                boost::random::normal_distribution<double> dist(b.mu, b.sigma);
                for (double& v : img.values()) v = dist(eng);
            }
        },
        base);
    return img;
}

/// Simulates null images of one shape under one model. Reuses the prepared
/// filter pipeline across calls; not thread-safe.
class NoiseSimulator {
public:
    NoiseSimulator(NoiseModel model, std::size_t rows, std::size_t cols)
        : model_((model.validate(), std::move(model))), rows_(rows), cols_(cols),
          pipeline_(rows, cols, model_.stages)
    {
        if (rows == 0 || cols == 0) throw ParameterError("image dimensions must be positive");
    }

    [[nodiscard]] const NoiseModel& model() const noexcept { return model_; }
    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }

    ImageGrid simulate(std::uint64_t seed)
    {
        Engine eng = make_engine(seed);
        return pipeline_.apply(sample_base_field(model_.base, rows_, cols_, eng));
    }

private:
    NoiseModel model_;
    std::size_t rows_, cols_;
    StagePipeline pipeline_;
};

inline ImageGrid simulate_noise_image(const NoiseModel& model, std::size_t rows, std::size_t cols,
                                      std::uint64_t seed)
{
    NoiseSimulator sim(model, rows, cols);
    return sim.simulate(seed);
}

// JSON form: {"base": {"type": "poisson", "lambda0": ...} | {"type": "gaussian", "mu", "sigma"},
//             "stages": [{"type": "smooth", "sigma"}, {"type": "sqrt"}, ...]}

inline nlohmann::json stage_to_json(const Stage& s)
{
    nlohmann::json j;
    std::visit(
        [&](const auto& st) {
            using S = std::decay_t<decltype(st)>;
            if constexpr (std::is_same_v<S, stage::Smooth>) j = {{"type", "smooth"}, {"sigma", st.sigma}};
            else if constexpr (std::is_same_v<S, stage::Sqrt>) j = {{"type", "sqrt"}};
            else if constexpr (std::is_same_v<S, stage::ZScore>)
                j = {{"type", "zscore"}, {"mu0", st.mu0}, {"sigma0", st.sigma0}};
            else if constexpr (std::is_same_v<S, stage::Msd>) j = {{"type", "msd"}, {"scales", st.scales}};
            else j = {{"type", "negate"}};
        },
        s);
    return j;
}

inline Stage stage_from_json(const nlohmann::json& j)
{
    Stage s;
    const auto type = j.at("type").get<std::string>();
    if (type == "smooth") s = stage::Smooth{j.at("sigma").get<double>()};
    else if (type == "sqrt") s = stage::Sqrt{};
    else if (type == "zscore") s = stage::ZScore{j.at("mu0").get<double>(), j.at("sigma0").get<double>()};
    else if (type == "msd") s = stage::Msd{j.at("scales").get<std::vector<double>>()};
    else if (type == "negate") s = stage::Negate{};
    else throw ModelError("unknown stage type '" + type + "'");
    return s;
}

inline void to_json(nlohmann::json& j, const NoiseModel& m)
{
    nlohmann::json base;
    std::visit(
        [&](const auto& b) {
            using B = std::decay_t<decltype(b)>;
            if constexpr (std::is_same_v<B, PoissonField>) base = {{"type", "poisson"}, {"lambda0", b.lambda0}};
            else base = {{"type", "gaussian"}, {"mu", b.mu}, {"sigma", b.sigma}};
        },
        m.base);
    nlohmann::json stages = nlohmann::json::array();
    for (const auto& st : m.stages) stages.push_back(stage_to_json(st));
    j = {{"base", base}, {"stages", stages}};
}

inline void from_json(const nlohmann::json& j, NoiseModel& m)
{
    const auto& base = j.at("base");
    const auto type = base.at("type").get<std::string>();
    if (type == "poisson") m.base = PoissonField{base.at("lambda0").get<double>()};
    else if (type == "gaussian") m.base = GaussianField{base.at("mu").get<double>(), base.at("sigma").get<double>()};
    else throw ModelError("unknown base field type '" + type + "'");
    m.stages.clear();
    if (j.contains("stages"))
        for (const auto& st : j.at("stages")) m.stages.push_back(stage_from_json(st));
}

} // namespace fcp
