#include "bailout/policy_io.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "bailout/errors.hpp"

namespace bailout {

namespace {
constexpr const char* kFormat = "bailout-policy-fit";
}

std::string policy_fit_to_json(const PolicyFit& fit) {
    nlohmann::ordered_json doc;
    doc["format"] = kFormat;
    doc["version"] = PolicyFit::kFormatVersion;
    doc["horizon"] = fit.horizon;
    doc["num_nodes"] = fit.num_nodes;
    doc["seed"] = fit.seed;
    doc["config_hash"] = fit.config_hash;
    auto steps = nlohmann::ordered_json::array();
    for (std::size_t t = 0; t < fit.beta.size(); ++t) {
        nlohmann::ordered_json step;
        step["t"] = t;
        step["fitted"] = static_cast<bool>(fit.fitted[t]);
        step["lambda"] = fit.lambda[t];
        step["cv_r2"] = fit.cv_r2[t];
        step["portfolio_size"] = fit.portfolio_size[t];
        step["negative_coefficients"] = fit.negative_coefficients[t];
        step["underdetermined"] = static_cast<bool>(fit.underdetermined[t]);
        auto beta = nlohmann::ordered_json::array();
        for (Eigen::Index i = 0; i < fit.beta[t].rows(); ++i) {
            std::vector<double> row;
            for (Eigen::Index k = 0; k < fit.beta[t].cols(); ++k) row.push_back(fit.beta[t](i, k));
            beta.push_back(row);
        }
        step["beta"] = std::move(beta);
        steps.push_back(std::move(step));
    }
    doc["steps"] = std::move(steps);
    return doc.dump(2) + "\n";
}

PolicyFit policy_fit_from_json(const std::string& text) {
    try {
        const auto doc = nlohmann::json::parse(text);
        if (doc.at("format").get<std::string>() != kFormat) throw ParseError("not a policy fit document");
        const int version = doc.at("version").get<int>();
        if (version != PolicyFit::kFormatVersion) throw ParseError("unsupported policy fit version " + std::to_string(version));
        PolicyFit fit = PolicyFit::initial(doc.at("num_nodes").get<int>(), doc.at("horizon").get<int>());
        fit.seed = doc.at("seed").get<std::uint64_t>();
        fit.config_hash = doc.at("config_hash").get<std::string>();
        const auto& steps = doc.at("steps");
        if (steps.size() != fit.beta.size()) throw ParseError("policy fit has the wrong number of time steps");
        for (const auto& step : steps) {
            const auto t = step.at("t").get<std::size_t>();
            if (t >= fit.beta.size()) throw ParseError("policy fit step index out of range");
            fit.fitted[t] = step.at("fitted").get<bool>();
            fit.lambda[t] = step.at("lambda").get<double>();
            fit.cv_r2[t] = step.at("cv_r2").get<double>();
            fit.portfolio_size[t] = step.at("portfolio_size").get<int>();
            fit.negative_coefficients[t] = step.at("negative_coefficients").get<int>();
            fit.underdetermined[t] = step.at("underdetermined").get<bool>();
            const auto& beta = step.at("beta");
            Eigen::MatrixXd& target = fit.beta[t];
            if (static_cast<Eigen::Index>(beta.size()) != target.rows()) throw ParseError("beta has the wrong number of rows");
            for (Eigen::Index i = 0; i < target.rows(); ++i) {
                const auto row = beta.at(static_cast<std::size_t>(i)).get<std::vector<double>>();
                if (static_cast<Eigen::Index>(row.size()) != target.cols()) throw ParseError("beta has the wrong number of columns");
                for (Eigen::Index k = 0; k < target.cols(); ++k) target(i, k) = row[static_cast<std::size_t>(k)];
            }
        }
        return fit;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("policy fit: ") + e.what());
    }
}

void save_policy_fit(const PolicyFit& fit, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << policy_fit_to_json(fit);
}

PolicyFit load_policy_fit(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return policy_fit_from_json(buffer.str());
}

}  // namespace bailout
