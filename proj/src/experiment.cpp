#include "bailout/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "bailout/errors.hpp"

namespace bailout {

using nlohmann::json;

void ExperimentConfig::validate() const {
    mdp.validate();
    solver.validate();
    if (alphas.empty()) throw ConfigError("alpha sweep must not be empty");
    for (double a : alphas) {
        if (!(a > 0.0 && a < 1.0)) throw ConfigError("alpha values must lie in (0, 1)");
    }
    if (scenario != "baseline" && scenario != "half-equity") throw ConfigError("scenario must be baseline or half-equity");
    if (network.empty()) throw ConfigError("network must not be empty");
    if (!(correlation > -1.0 && correlation < 1.0)) throw ConfigError("correlation must lie in (-1, 1)");
    if (alpha_search.iterations < 0) throw ConfigError("alpha_search.iterations must be >= 0");
    if (!(alpha_search.gate_std_errors >= 0.0)) throw ConfigError("alpha_search.gate_std_errors must be >= 0");
    for (auto [id, amount] : preset_investment) {
        if (id < 0) throw ConfigError("preset_investment ids are 1-based");
        if (!(amount >= 0.0)) throw ConfigError("preset_investment amounts must be non-negative");
    }
}

namespace {

void reject_unknown(const json& obj, std::initializer_list<const char*> keys, const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const char* k : keys) known = known || item.key() == k;
        if (!known) throw ConfigError("unknown key \"" + item.key() + "\" in " + where);
    }
}

template <typename T>
void read(const json& obj, const char* key, T& target) {
    if (obj.contains(key)) target = obj.at(key).get<T>();
}

std::string targeting_name(TargetingMode mode) {
    return mode == TargetingMode::kSingleOrAll ? "single-or-all" : "all-risky-uniform";
}

}  // namespace

ExperimentConfig experiment_config_from_json(const json& doc) {
    ExperimentConfig cfg;
    try {
        reject_unknown(doc,
                       {"network", "scenario", "preset_investment", "kite_complete_exposures", "correlation", "eba", "mdp",
                        "solver", "alphas", "time_curves", "alpha_search", "seed", "out_dir", "comment"},
                       "config");
        read(doc, "network", cfg.network);
        read(doc, "scenario", cfg.scenario);
        read(doc, "kite_complete_exposures", cfg.kite_complete_exposures);
        read(doc, "correlation", cfg.correlation);
        read(doc, "alphas", cfg.alphas);
        read(doc, "time_curves", cfg.time_curves);
        read(doc, "seed", cfg.seed);
        read(doc, "out_dir", cfg.out_dir);
        if (doc.contains("preset_investment")) {
            for (const auto& item : doc.at("preset_investment").items()) {
                const int id = std::stoi(item.key());
                if (id < 1) throw ConfigError("preset_investment ids are 1-based");
                cfg.preset_investment[id - 1] = item.value().get<double>();
            }
        }
        if (doc.contains("eba")) {
            const json& e = doc.at("eba");
            reject_unknown(e, {"path", "lgd", "interbank_fraction", "target_density", "seed"}, "eba");
            read(e, "path", cfg.eba.path);
            read(e, "lgd", cfg.eba.lgd);
            read(e, "interbank_fraction", cfg.eba.interbank_fraction);
            read(e, "target_density", cfg.eba.target_density);
            read(e, "seed", cfg.eba.seed);
        }
        if (doc.contains("mdp")) {
            const json& m = doc.at("mdp");
            reject_unknown(m, {"horizon", "gamma", "levels_bp", "targeting", "risky_threshold"}, "mdp");
            read(m, "horizon", cfg.mdp.horizon);
            read(m, "gamma", cfg.mdp.gamma);
            read(m, "levels_bp", cfg.mdp.levels_bp);
            read(m, "risky_threshold", cfg.mdp.risky_threshold);
            if (m.contains("targeting")) {
                const auto name = m.at("targeting").get<std::string>();
                if (name == "single-or-all") cfg.mdp.targeting = TargetingMode::kSingleOrAll;
                else if (name == "all-risky-uniform") cfg.mdp.targeting = TargetingMode::kAllRiskyUniform;
                else throw ConfigError("mdp.targeting must be single-or-all or all-risky-uniform");
            }
        }
        if (doc.contains("solver")) {
            const json& s = doc.at("solver");
            reject_unknown(s,
                           {"n_bellman", "n_evaluation", "multi_default_states", "max_forced_defaults", "action_variants",
                            "lambda_grid", "folds", "shrink_to_ones", "feature_scaling"},
                           "solver");
            read(s, "n_bellman", cfg.solver.n_bellman);
            read(s, "n_evaluation", cfg.solver.n_evaluation);
            read(s, "multi_default_states", cfg.solver.multi_default_states);
            read(s, "max_forced_defaults", cfg.solver.max_forced_defaults);
            read(s, "action_variants", cfg.solver.action_variants);
            read(s, "lambda_grid", cfg.solver.lambda_grid);
            read(s, "folds", cfg.solver.folds);
            read(s, "shrink_to_ones", cfg.solver.shrink_to_ones);
            if (s.contains("feature_scaling")) {
                const auto name = s.at("feature_scaling").get<std::string>();
                if (name == "column") cfg.solver.feature_scaling = RidgeScaling::kPerColumn;
                else if (name == "global") cfg.solver.feature_scaling = RidgeScaling::kGlobal;
                else throw ConfigError("solver.feature_scaling must be column or global");
            }
        }
        if (doc.contains("alpha_search")) {
            const json& a = doc.at("alpha_search");
            reject_unknown(a, {"iterations", "gate_std_errors"}, "alpha_search");
            read(a, "iterations", cfg.alpha_search.iterations);
            read(a, "gate_std_errors", cfg.alpha_search.gate_std_errors);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    } catch (const std::invalid_argument&) {
        throw ConfigError("config: preset_investment keys must be node numbers");
    }
    cfg.solver.seed = cfg.seed;
    cfg.validate();
    return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(path + ": " + e.what());
    }
    return experiment_config_from_json(doc);
}

json experiment_config_to_json(const ExperimentConfig& cfg) {
    json preset = json::object();
    for (auto [id, amount] : cfg.preset_investment) preset[std::to_string(id + 1)] = amount;
    return json{
        {"network", cfg.network},
        {"scenario", cfg.scenario},
        {"preset_investment", preset},
        {"kite_complete_exposures", cfg.kite_complete_exposures},
        {"correlation", cfg.correlation},
        {"eba",
         {{"path", cfg.eba.path},
          {"lgd", cfg.eba.lgd},
          {"interbank_fraction", cfg.eba.interbank_fraction},
          {"target_density", cfg.eba.target_density},
          {"seed", cfg.eba.seed}}},
        {"mdp",
         {{"horizon", cfg.mdp.horizon},
          {"gamma", cfg.mdp.gamma},
          {"levels_bp", cfg.mdp.levels_bp},
          {"targeting", targeting_name(cfg.mdp.targeting)},
          {"risky_threshold", cfg.mdp.risky_threshold}}},
        {"solver",
         {{"n_bellman", cfg.solver.n_bellman},
          {"n_evaluation", cfg.solver.n_evaluation},
          {"multi_default_states", cfg.solver.multi_default_states},
          {"max_forced_defaults", cfg.solver.max_forced_defaults},
          {"action_variants", cfg.solver.action_variants},
          {"lambda_grid", cfg.solver.lambda_grid},
          {"folds", cfg.solver.folds},
          {"shrink_to_ones", cfg.solver.shrink_to_ones},
          {"feature_scaling", cfg.solver.feature_scaling == RidgeScaling::kGlobal ? "global" : "column"}}},
        {"alphas", cfg.alphas},
        {"time_curves", cfg.time_curves},
        {"alpha_search", {{"iterations", cfg.alpha_search.iterations}, {"gate_std_errors", cfg.alpha_search.gate_std_errors}}},
        {"seed", cfg.seed},
        {"out_dir", cfg.out_dir},
    };
}

std::string config_hash(const ExperimentConfig& cfg) {
    json doc = experiment_config_to_json(cfg);
    doc.erase("out_dir");  // where results go does not change them
    const std::string text = doc.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

FinancialNetwork build_network(const ExperimentConfig& cfg, double alpha) {
    FinancialNetwork net;
    if (cfg.network == "builtin:kk") {
        net = build_kk_network({alpha, cfg.correlation, cfg.kite_complete_exposures});
    } else if (cfg.network == "builtin:eba") {
        EbaOptions options = cfg.eba;
        options.alpha = alpha;
        options.correlation = cfg.correlation;
        net = build_eba_network(load_eba(options.path.empty() ? default_eba_path() : options.path), options);
    } else {
        net = load_network_file(cfg.network);
        set_alpha(net, alpha);
    }
    if (cfg.scenario == "half-equity") net = halve_equity(net);
    if (!cfg.preset_investment.empty()) net = preset_investment(net, cfg.preset_investment);
    return net;
}

MdpState build_initial_state(const ExperimentConfig& cfg, double alpha) {
    return initial_state(build_network(cfg, alpha), cfg.mdp.horizon);
}

namespace {

// Same evaluation draws for every alpha, so curves across alpha are smooth.
RandomStream evaluation_stream(const ExperimentConfig& cfg, int time_to_end) {
    return RandomStream(cfg.seed, 0xE7A1).split(static_cast<std::uint64_t>(time_to_end));
}

struct SignCheck {
    ConvenienceRow row;
    int sign = 0;  // +1 / -1 beyond the gate, 0 inside it
};

SignCheck convenience_at_t0(const ExperimentConfig& cfg, double alpha, const PolicyFit* fit_hint) {
    const MdpState s0 = build_initial_state(cfg, alpha);
    PolicyFit fit = fit_hint != nullptr ? *fit_hint : fit_policy(s0, cfg.mdp, cfg.solver);
    const ConvenienceEstimate c = convenience(s0, fit, cfg.mdp, cfg.solver, evaluation_stream(cfg, cfg.mdp.horizon));
    SignCheck out;
    out.row = {alpha, cfg.mdp.horizon, c.value, c.std_error, c.best_label};
    const double gate = cfg.alpha_search.gate_std_errors * c.std_error;
    out.sign = c.value > gate ? 1 : (c.value < -gate ? -1 : 0);
    return out;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

}  // namespace

AlphaEvaluation evaluate_alpha(const ExperimentConfig& cfg, double alpha, bool time_curves) {
    AlphaEvaluation out;
    const MdpState s0 = build_initial_state(cfg, alpha);
    out.fit = fit_policy(s0, cfg.mdp, cfg.solver);
    out.fit.config_hash = config_hash(cfg);
    const int horizon = cfg.mdp.horizon;
    const int shortest = time_curves ? 1 : horizon;
    for (int m = horizon; m >= shortest; --m) {
        MdpState s = s0;
        s.t = horizon - m;
        const QTable table = q_table(s, out.fit, cfg.mdp, cfg.solver.evaluation_samples(), evaluation_stream(cfg, m));
        for (std::size_t a = 0; a < table.entries.size(); ++a) {
            const ActionValue& e = table.entries[a];
            out.q_rows.push_back({alpha, m, e.action.label, e.q, e.std_error, static_cast<int>(a) == table.best});
        }
        const ConvenienceEstimate c = convenience_from(table);
        out.convenience.push_back({alpha, m, c.value, c.std_error, c.best_label});
    }
    return out;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    ExperimentResult result;
    result.config_hash = config_hash(cfg);

    std::vector<SignCheck> checks;
    for (double alpha : cfg.alphas) {
        AlphaEvaluation eval = evaluate_alpha(cfg, alpha, cfg.time_curves);
        result.q_rows.insert(result.q_rows.end(), eval.q_rows.begin(), eval.q_rows.end());
        result.convenience.insert(result.convenience.end(), eval.convenience.begin(), eval.convenience.end());
        checks.push_back(convenience_at_t0(cfg, alpha, &eval.fit));
        result.fits.push_back(std::move(eval.fit));
    }
    std::sort(checks.begin(), checks.end(), [](const SignCheck& a, const SignCheck& b) { return a.row.alpha < b.row.alpha; });

    // Bracket: the smallest clearly positive alpha and the largest clearly
    // negative alpha below it.
    AlphaInterval& ac = result.alpha_c;
    ac.evaluations = static_cast<int>(checks.size());
    int hi_idx = -1;
    for (std::size_t i = 0; i < checks.size(); ++i) {
        if (checks[i].sign > 0) {
            hi_idx = static_cast<int>(i);
            break;
        }
    }
    int lo_idx = -1;
    for (int i = hi_idx - 1; i >= 0; --i) {
        if (checks[static_cast<std::size_t>(i)].sign < 0) {
            lo_idx = i;
            break;
        }
    }
    if (hi_idx >= 0 && lo_idx >= 0) {
        ac.bracketed = true;
        ac.lo = checks[static_cast<std::size_t>(lo_idx)].row.alpha;
        ac.hi = checks[static_cast<std::size_t>(hi_idx)].row.alpha;
        for (int it = 0; it < cfg.alpha_search.iterations; ++it) {
            const double mid = std::sqrt(ac.lo * ac.hi);
            SignCheck c = convenience_at_t0(cfg, mid, nullptr);
            ++ac.evaluations;
            checks.push_back(c);
            if (c.sign > 0) ac.hi = mid;
            else if (c.sign < 0) ac.lo = mid;
            else break;  // inside the noise band: cannot narrow further
        }
    }
    std::sort(checks.begin(), checks.end(), [](const SignCheck& a, const SignCheck& b) { return a.row.alpha < b.row.alpha; });
    for (const SignCheck& c : checks) result.alpha_sweep.push_back(c.row);
    return result;
}

std::vector<std::string> write_experiment(const ExperimentResult& result, const ExperimentConfig& cfg) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);
    const std::string header = "# config_hash=" + result.config_hash + " seed=" + std::to_string(cfg.seed) + "\n";
    std::vector<std::string> written;
    auto emit = [&](const std::string& name, const std::string& body) {
        const std::string path = (fs::path(cfg.out_dir) / name).string();
        std::ofstream out(path, std::ios::binary);
        if (!out) throw ConfigError("cannot write " + path);
        out << header << body;
        written.push_back(path);
    };

    std::ostringstream q;
    q << "alpha,time_to_end,action,q,std_error,best\n";
    for (const QRow& r : result.q_rows) {
        q << fmt(r.alpha) << ',' << r.time_to_end << ',' << r.action << ',' << fmt(r.q) << ',' << fmt(r.std_error) << ','
          << (r.best ? 1 : 0) << '\n';
    }
    emit("q_values.csv", q.str());

    std::ostringstream c;
    c << "alpha,time_to_end,convenience,std_error,best_nontrivial\n";
    for (const ConvenienceRow& r : result.convenience) {
        c << fmt(r.alpha) << ',' << r.time_to_end << ',' << fmt(r.value) << ',' << fmt(r.std_error) << ',' << r.best_label << '\n';
    }
    emit("convenience.csv", c.str());

    std::ostringstream s;
    s << "alpha,convenience_t0,std_error,best_nontrivial\n";
    for (const ConvenienceRow& r : result.alpha_sweep) {
        s << fmt(r.alpha) << ',' << fmt(r.value) << ',' << fmt(r.std_error) << ',' << r.best_label << '\n';
    }
    emit("alpha_sweep.csv", s.str());

    std::ostringstream sum;
    sum << "key,alpha,time_to_end,value,std_error\n";
    for (const QRow& r : result.q_rows) {
        if (r.best) sum << "best_action," << fmt(r.alpha) << ',' << r.time_to_end << ',' << r.action << ',' << fmt(r.std_error) << '\n';
    }
    const AlphaInterval& ac = result.alpha_c;
    if (ac.bracketed) {
        sum << "alpha_c_lo,,," << fmt(ac.lo) << ",\n";
        sum << "alpha_c_hi,,," << fmt(ac.hi) << ",\n";
    } else {
        sum << "alpha_c,,,unbracketed,\n";
    }
    for (std::size_t i = 0; i < result.fits.size() && i < cfg.alphas.size(); ++i) {
        const PolicyFit& f = result.fits[i];
        for (std::size_t t = 0; t < f.beta.size(); ++t) {
            sum << "fit_cv_r2," << fmt(cfg.alphas[i]) << ',' << (cfg.mdp.horizon - static_cast<int>(t)) << ',' << fmt(f.cv_r2[t])
                << ",\n";
        }
    }
    emit("summary.csv", sum.str());
    return written;
}

}  // namespace bailout
