#include "dpr/scenario.hpp"

#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <thread>
#include <utility>

namespace dpr::cli {

using detectors::DetectorConfig;
using detectors::GeigerConfig;
using detectors::LinearModeConfig;
using nlohmann::json;
using protocols::DetectionRecord;
using protocols::DetectorId;
using protocols::Protocol;
using protocols::RunStatistics;

namespace {

// --- parsing helpers ---------------------------------------------------------

struct Cursor {
    const json* node;
    std::string path;

    std::string join(const char* key) const {
        return path.empty() ? std::string(key) : path + "." + key;
    }
    [[noreturn]] void fail(const std::string& msg) const { throw ConfigError(path, msg); }

    Cursor child(const char* key) const {
        if (!node->is_object()) fail("expected an object");
        auto it = node->find(key);
        if (it == node->end()) throw ConfigError(join(key), "missing required field");
        return Cursor{&*it, join(key)};
    }
    std::optional<Cursor> maybe(const char* key) const {
        if (!node->is_object()) fail("expected an object");
        auto it = node->find(key);
        if (it == node->end() || it->is_null()) return std::nullopt;
        return Cursor{&*it, join(key)};
    }

    double number() const {
        if (!node->is_number()) fail("expected a number");
        return node->get<double>();
    }
    std::uint64_t uinteger() const {
        if (node->is_number_unsigned()) return node->get<std::uint64_t>();
        if (node->is_number_integer() && node->get<std::int64_t>() >= 0) {
            return static_cast<std::uint64_t>(node->get<std::int64_t>());
        }
        fail("expected a nonnegative integer");
    }
    bool boolean() const {
        if (!node->is_boolean()) fail("expected a boolean");
        return node->get<bool>();
    }
    std::string str() const {
        if (!node->is_string()) fail("expected a string");
        return node->get<std::string>();
    }
};

double number_or(const Cursor& parent, const char* key, double fallback) {
    auto c = parent.maybe(key);
    return c ? c->number() : fallback;
}

bool bool_or(const Cursor& parent, const char* key, bool fallback) {
    auto c = parent.maybe(key);
    return c ? c->boolean() : fallback;
}

detectors::ClickRamp parse_ramp(const Cursor& c) {
    const std::string s = c.str();
    if (s == "linear") return detectors::ClickRamp::linear;
    if (s == "logistic") return detectors::ClickRamp::logistic;
    c.fail("expected \"linear\" or \"logistic\"");
}

LinearModeConfig parse_linear(const Cursor& c) {
    LinearModeConfig cfg;
    cfg.p_never_uw = c.child("p_never_uw").number();
    cfg.p_always_uw = c.child("p_always_uw").number();
    if (auto ramp = c.maybe("ramp")) cfg.ramp = parse_ramp(*ramp);
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        c.fail(e.what());
    }
    return cfg;
}

GeigerConfig parse_geiger(const Cursor& c) {
    GeigerConfig cfg;
    cfg.efficiency = number_or(c, "efficiency", 1.0);
    cfg.dark_prob = number_or(c, "dark_prob", 0.0);
    cfg.kappa_per_uw = number_or(c, "kappa_per_uw", 1.0);
    if (auto d = c.maybe("deadtime_slots")) cfg.deadtime_slots = d->uinteger();
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        c.fail(e.what());
    }
    return cfg;
}

DetectorConfig parse_detector(const Cursor& c) {
    const std::string mode = c.child("mode").str();
    if (mode == "linear") return parse_linear(c);
    if (mode == "geiger") return parse_geiger(c);
    c.child("mode").fail("expected \"linear\" or \"geiger\"");
}

DetectorConfig default_honest_detector() {
    GeigerConfig g;
    g.efficiency = 0.1;
    return g;
}

DetectorConfig default_bob_prime_detector() {
    return GeigerConfig{}; // ideal copy: efficiency 1, no darks, no deadtime
}

DetectorConfig detector_or(const Cursor& parent, const char* key, DetectorConfig fallback) {
    auto c = parent.maybe(key);
    return c ? parse_detector(*c) : std::move(fallback);
}

attack::FsgMode parse_fsg_mode(const Cursor& c) {
    const std::string s = c.str();
    if (s == "continuous") return attack::FsgMode::continuous_train;
    if (s == "pulse_pair") return attack::FsgMode::pulse_pair;
    c.fail("expected \"continuous\" or \"pulse_pair\"");
}

FsgSection parse_fsg(const Cursor& c) {
    FsgSection fsg;
    if (auto m = c.maybe("mode")) fsg.mode = parse_fsg_mode(*m);
    if (auto v = c.maybe("trigger_power_uw")) fsg.trigger_power_uw = v->number();
    if (auto v = c.maybe("train_power_uw")) fsg.train_power_uw = v->number();
    if (auto v = c.maybe("data_power_uw")) fsg.data_power_uw = v->number();
    if (auto v = c.maybe("loss_target")) fsg.loss_target = v->number();
    if (auto v = c.maybe("loss_target_transmittance")) {
        fsg.loss_target_transmittance = v->number();
    }
    if (fsg.loss_target && fsg.loss_target_transmittance) {
        c.fail("loss_target and loss_target_transmittance are mutually exclusive");
    }
    if (fsg.loss_target && !(*fsg.loss_target >= 0.0 && *fsg.loss_target <= 1.0)) {
        c.child("loss_target").fail("must lie in [0, 1]");
    }
    return fsg;
}

// --- serialization helpers ---------------------------------------------------

json detector_to_json(const DetectorConfig& cfg) {
    json j;
    if (const auto* linear = std::get_if<LinearModeConfig>(&cfg)) {
        j["mode"] = "linear";
        j["p_never_uw"] = linear->p_never_uw;
        j["p_always_uw"] = linear->p_always_uw;
        j["ramp"] = linear->ramp == detectors::ClickRamp::linear ? "linear" : "logistic";
    } else {
        const auto& g = std::get<GeigerConfig>(cfg);
        j["mode"] = "geiger";
        j["efficiency"] = g.efficiency;
        j["dark_prob"] = g.dark_prob;
        j["kappa_per_uw"] = g.kappa_per_uw;
        j["deadtime_slots"] = g.deadtime_slots;
    }
    return j;
}

json linear_to_json(const LinearModeConfig& cfg) {
    return detector_to_json(DetectorConfig{cfg});
}

json fsg_to_json(const FsgSection& fsg) {
    json j;
    j["mode"] = fsg.mode == attack::FsgMode::continuous_train ? "continuous" : "pulse_pair";
    j["trigger_power_uw"] = fsg.trigger_power_uw ? json(*fsg.trigger_power_uw) : json();
    j["train_power_uw"] = fsg.train_power_uw ? json(*fsg.train_power_uw) : json();
    j["data_power_uw"] = fsg.data_power_uw ? json(*fsg.data_power_uw) : json();
    j["loss_target"] = fsg.loss_target ? json(*fsg.loss_target) : json();
    j["loss_target_transmittance"] =
        fsg.loss_target_transmittance ? json(*fsg.loss_target_transmittance) : json();
    return j;
}

} // namespace

ScenarioConfig parse_scenario_config(const json& j) {
    Cursor root{&j, ""};
    if (!j.is_object()) root.fail("scenario config must be a JSON object");

    ScenarioConfig cfg;
    const std::string protocol = root.child("protocol").str();
    if (protocol == "dps") {
        cfg.protocol = Protocol::dps;
    } else if (protocol == "cow") {
        cfg.protocol = Protocol::cow;
    } else {
        root.child("protocol").fail("expected \"dps\" or \"cow\"");
    }

    const std::string mode = root.child("mode").str();
    if (mode == "honest") {
        cfg.mode = RunMode::honest;
    } else if (mode == "attack") {
        cfg.mode = RunMode::attack;
    } else {
        root.child("mode").fail("expected \"honest\" or \"attack\"");
    }

    if (auto s = root.maybe("seed")) cfg.seed = s->uinteger();
    if (auto n = root.maybe("n_bits")) cfg.n_bits = n->uinteger();
    cfg.mean_photons = number_or(root, "mean_photons", 0.2);
    cfg.channel_transmittance = number_or(root, "channel_transmittance", 1.0);
    cfg.emit_record = bool_or(root, "emit_record", false);
    cfg.z_star = number_or(root, "z_star", 3.0);
    if (auto out = root.maybe("out")) cfg.out_path = out->str();
    if (!(cfg.mean_photons >= 0.0)) root.child("mean_photons").fail("must be >= 0");
    if (!(cfg.channel_transmittance >= 0.0 && cfg.channel_transmittance <= 1.0)) {
        root.child("channel_transmittance").fail("must lie in [0, 1]");
    }

    if (cfg.protocol == Protocol::dps) {
        auto det = root.maybe("detectors");
        cfg.dps.d0 = det ? detector_or(*det, "d0", default_honest_detector())
                         : default_honest_detector();
        cfg.dps.d1 = det ? detector_or(*det, "d1", default_honest_detector())
                         : default_honest_detector();
    } else {
        Cursor cow = root.child("cow");
        cfg.cow.t_b = number_or(cow, "t_b", 0.5);
        cfg.cow.decoy_prob = number_or(cow, "decoy_prob", 0.0);
        cfg.cow.one_monitor = bool_or(cow, "one_monitor", false);
        if (auto p = cow.maybe("monitored_port")) {
            const std::string s = p->str();
            if (s == "constructive") {
                cfg.cow.monitored_port = protocols::MonitorPort::constructive;
            } else if (s == "destructive") {
                cfg.cow.monitored_port = protocols::MonitorPort::destructive;
            } else {
                p->fail("expected \"constructive\" or \"destructive\"");
            }
        }
        if (!(cfg.cow.t_b > 0.0 && cfg.cow.t_b < 1.0)) {
            cow.child("t_b").fail("must lie strictly in (0, 1)");
        }
        if (!(cfg.cow.decoy_prob >= 0.0 && cfg.cow.decoy_prob < 1.0)) {
            cow.child("decoy_prob").fail("must lie in [0, 1)");
        }
        auto det = root.maybe("detectors");
        cfg.cow.db = det ? detector_or(*det, "db", default_honest_detector())
                         : default_honest_detector();
        cfg.cow.dm1 = det ? detector_or(*det, "dm1", default_honest_detector())
                          : default_honest_detector();
        cfg.cow.dm2 = det ? detector_or(*det, "dm2", default_honest_detector())
                          : default_honest_detector();
    }

    if (cfg.mode == RunMode::attack) {
        Cursor a = root.child("attack");
        AttackSection attack_section;
        attack_section.position_transmittance =
            number_or(a, "position_transmittance", 1.0);
        if (!(attack_section.position_transmittance > 0.0 &&
              attack_section.position_transmittance <= 1.0)) {
            a.child("position_transmittance").fail("must lie in (0, 1]");
        }
        if (auto f = a.maybe("fsg")) attack_section.fsg = parse_fsg(*f);

        Cursor blinded = a.child("blinded");
        auto bob_prime = a.maybe("bob_prime");
        if (cfg.protocol == Protocol::dps) {
            DpsAttackDetectors d;
            d.blinded_d0 = parse_linear(blinded.child("d0"));
            d.blinded_d1 = parse_linear(blinded.child("d1"));
            d.bob_prime_d0 =
                bob_prime ? detector_or(*bob_prime, "d0", default_bob_prime_detector())
                          : default_bob_prime_detector();
            d.bob_prime_d1 =
                bob_prime ? detector_or(*bob_prime, "d1", default_bob_prime_detector())
                          : default_bob_prime_detector();
            attack_section.detectors = d;
        } else {
            CowAttackDetectors c;
            c.blinded_db = parse_linear(blinded.child("db"));
            c.blinded_dm1 = parse_linear(blinded.child("dm1"));
            c.blinded_dm2 = parse_linear(blinded.child("dm2"));
            c.bob_prime_db =
                bob_prime ? detector_or(*bob_prime, "db", default_bob_prime_detector())
                          : default_bob_prime_detector();
            c.bob_prime_dm1 =
                bob_prime ? detector_or(*bob_prime, "dm1", default_bob_prime_detector())
                          : default_bob_prime_detector();
            c.bob_prime_dm2 =
                bob_prime ? detector_or(*bob_prime, "dm2", default_bob_prime_detector())
                          : default_bob_prime_detector();
            attack_section.detectors = c;
        }
        cfg.attack = std::move(attack_section);
    }
    return cfg;
}

json ScenarioConfig::echo() const {
    json j;
    j["protocol"] = protocols::to_string(protocol);
    j["mode"] = mode == RunMode::honest ? "honest" : "attack";
    j["seed"] = seed;
    j["n_bits"] = n_bits;
    j["mean_photons"] = mean_photons;
    j["channel_transmittance"] = channel_transmittance;
    j["emit_record"] = emit_record;
    j["z_star"] = z_star;
    j["out"] = out_path ? json(*out_path) : json();
    if (protocol == Protocol::dps) {
        j["detectors"] = {{"d0", detector_to_json(dps.d0)},
                          {"d1", detector_to_json(dps.d1)}};
    } else {
        j["cow"] = {{"t_b", cow.t_b},
                    {"decoy_prob", cow.decoy_prob},
                    {"one_monitor", cow.one_monitor},
                    {"monitored_port",
                     cow.monitored_port == protocols::MonitorPort::destructive
                         ? "destructive"
                         : "constructive"}};
        j["detectors"] = {{"db", detector_to_json(cow.db)},
                          {"dm1", detector_to_json(cow.dm1)},
                          {"dm2", detector_to_json(cow.dm2)}};
    }
    if (attack) {
        json a;
        a["position_transmittance"] = attack->position_transmittance;
        a["fsg"] = fsg_to_json(attack->fsg);
        if (const auto* d = std::get_if<DpsAttackDetectors>(&attack->detectors)) {
            a["blinded"] = {{"d0", linear_to_json(d->blinded_d0)},
                            {"d1", linear_to_json(d->blinded_d1)}};
            a["bob_prime"] = {{"d0", detector_to_json(d->bob_prime_d0)},
                              {"d1", detector_to_json(d->bob_prime_d1)}};
        } else {
            const auto& c = std::get<CowAttackDetectors>(attack->detectors);
            a["blinded"] = {{"db", linear_to_json(c.blinded_db)},
                            {"dm1", linear_to_json(c.blinded_dm1)},
                            {"dm2", linear_to_json(c.blinded_dm2)}};
            a["bob_prime"] = {{"db", detector_to_json(c.bob_prime_db)},
                              {"dm1", detector_to_json(c.bob_prime_dm1)},
                              {"dm2", detector_to_json(c.bob_prime_dm2)}};
        }
        j["attack"] = a;
    }
    return j;
}

namespace {

// --- run orchestration --------------------------------------------------------

// Substream roles; documented so a scenario file plus seed reproduces a run
// bit-exactly.
enum : std::uint64_t { kAliceStream = 1, kBobStream = 2, kEveStream = 3 };

struct RunArtifacts {
    RunStatistics stats;
    DetectionRecord record;
    std::vector<std::string> fsg_warnings;
};

std::vector<int> draw_bits(std::size_t n, Rng& rng) {
    std::vector<int> bits(n);
    for (auto& b : bits) b = rng.bernoulli(0.5) ? 1 : 0;
    return bits;
}

RunArtifacts run_honest(const ScenarioConfig& cfg, std::uint64_t seed) {
    Rng alice_rng{derive_seed(seed, kAliceStream)};
    Rng bob_rng{derive_seed(seed, kBobStream)};
    const std::vector<int> bits = draw_bits(cfg.n_bits, alice_rng);

    RunArtifacts out;
    if (cfg.protocol == Protocol::dps) {
        const auto emission = protocols::dps_alice_emit(bits, cfg.mean_photons, alice_rng);
        const auto channel = optics::attenuate(emission.train, cfg.channel_transmittance);
        protocols::DpsConfig bob{cfg.mean_photons, cfg.n_bits, cfg.dps.d0, cfg.dps.d1};
        out.record = protocols::dps_bob_measure(channel, bob, bob_rng);
        out.stats = protocols::dps_sift(bits, emission.phases_rad, out.record).stats;
    } else {
        const auto emission =
            protocols::cow_alice_emit(bits, cfg.mean_photons, cfg.cow.decoy_prob, alice_rng);
        const auto channel = optics::attenuate(emission.train, cfg.channel_transmittance);
        protocols::CowConfig bob{cfg.mean_photons, cfg.n_bits,      cfg.cow.t_b,
                                 cfg.cow.decoy_prob, cfg.cow.one_monitor,
                                 cfg.cow.monitored_port, cfg.cow.db, cfg.cow.dm1,
                                 cfg.cow.dm2};
        out.record = protocols::cow_bob_measure(channel, bob, bob_rng);
        out.stats = protocols::cow_sift(emission.frames, out.record).stats;
    }
    return out;
}

const GeigerConfig* honest_geiger(const DetectorConfig& cfg) {
    return std::get_if<GeigerConfig>(&cfg);
}

attack::FsgConfig resolve_fsg(const ScenarioConfig& cfg) {
    const FsgSection& section = cfg.attack->fsg;
    attack::FsgConfig fsg;
    fsg.mode = section.mode;
    fsg.trigger_power_uw = section.trigger_power_uw;
    fsg.train_power_uw = section.train_power_uw;
    fsg.data_power_uw = section.data_power_uw;
    fsg.loss_target = section.loss_target;

    if (section.loss_target_transmittance) {
        // Match Bob's expected rates over a lossy line: exact rate ratio, not
        // the small-signal approximation.
        const GeigerConfig* bob;
        const GeigerConfig* eve;
        if (cfg.protocol == Protocol::dps) {
            bob = honest_geiger(cfg.dps.d0);
            eve = honest_geiger(
                std::get<DpsAttackDetectors>(cfg.attack->detectors).bob_prime_d0);
        } else {
            bob = honest_geiger(cfg.cow.db);
            eve = honest_geiger(
                std::get<CowAttackDetectors>(cfg.attack->detectors).bob_prime_db);
        }
        if (!bob || !eve) {
            throw ConfigError("attack.fsg.loss_target_transmittance",
                              "requires Geiger-mode honest and intercept detectors");
        }
        fsg.loss_target = attack::loss_target_for_transmittance(
            *section.loss_target_transmittance, cfg.mean_photons, *bob, *eve);
    }

    if (cfg.protocol == Protocol::cow && cfg.cow.one_monitor) {
        fsg.unmonitored_port =
            cfg.cow.monitored_port == protocols::MonitorPort::destructive
                ? attack::UnmonitoredPort::constructive
                : attack::UnmonitoredPort::destructive;
    }
    return fsg;
}

RunArtifacts run_attacked(const ScenarioConfig& cfg, std::uint64_t seed,
                          analysis::FeasibilityReport& feasibility_out) {
    Rng alice_rng{derive_seed(seed, kAliceStream)};
    Rng bob_rng{derive_seed(seed, kBobStream)};
    Rng eve_rng{derive_seed(seed, kEveStream)};
    const std::vector<int> bits = draw_bits(cfg.n_bits, alice_rng);
    const attack::FsgConfig fsg = resolve_fsg(cfg);
    const bool relaxed = fsg.mode == attack::FsgMode::pulse_pair;

    RunArtifacts out;
    if (cfg.protocol == Protocol::dps) {
        const auto& det = std::get<DpsAttackDetectors>(cfg.attack->detectors);
        const auto emission = protocols::dps_alice_emit(bits, cfg.mean_photons, alice_rng);

        attack::InterceptConfig intercept;
        intercept.position_transmittance = cfg.attack->position_transmittance;
        intercept.bob_prime = protocols::DpsConfig{cfg.mean_photons, cfg.n_bits,
                                                   det.bob_prime_d0, det.bob_prime_d1};
        const DetectionRecord intended =
            attack::eve_intercept(emission.train, intercept, eve_rng);

        const LinearModeConfig thresholds =
            attack::effective_thresholds(det.blinded_d0, det.blinded_d1);
        feasibility_out = analysis::check_dps_feasibility(thresholds, relaxed);

        auto build = attack::build_dps_faked_train(intended, fsg, thresholds);
        out.fsg_warnings = std::move(build.warnings);

        protocols::DpsConfig blinded_bob{cfg.mean_photons, cfg.n_bits, det.blinded_d0,
                                         det.blinded_d1};
        out.record = protocols::dps_bob_measure(build.train, blinded_bob, bob_rng);
        out.stats = protocols::dps_sift(bits, emission.phases_rad, out.record).stats;
    } else {
        const auto& det = std::get<CowAttackDetectors>(cfg.attack->detectors);
        const auto emission =
            protocols::cow_alice_emit(bits, cfg.mean_photons, cfg.cow.decoy_prob, alice_rng);

        attack::InterceptConfig intercept;
        intercept.position_transmittance = cfg.attack->position_transmittance;
        intercept.bob_prime = protocols::CowConfig{
            cfg.mean_photons,  cfg.n_bits,        cfg.cow.t_b,
            cfg.cow.decoy_prob, cfg.cow.one_monitor, cfg.cow.monitored_port,
            det.bob_prime_db,  det.bob_prime_dm1, det.bob_prime_dm2};
        const DetectionRecord intended =
            attack::eve_intercept(emission.train, intercept, eve_rng);

        const attack::CowThresholds thresholds{
            attack::effective_thresholds(det.blinded_dm1, det.blinded_dm2),
            det.blinded_db};
        feasibility_out = analysis::check_cow_feasibility(
            thresholds.monitor, thresholds.data, cfg.cow.t_b, relaxed,
            cfg.cow.one_monitor);

        auto build =
            attack::build_cow_faked_train(intended, fsg, thresholds, cfg.cow.t_b);
        out.fsg_warnings = std::move(build.warnings);

        protocols::CowConfig blinded_bob{cfg.mean_photons, cfg.n_bits,      cfg.cow.t_b,
                                         cfg.cow.decoy_prob, cfg.cow.one_monitor,
                                         cfg.cow.monitored_port, det.blinded_db,
                                         det.blinded_dm1, det.blinded_dm2};
        out.record = protocols::cow_bob_measure(build.train, blinded_bob, bob_rng);
        out.stats = protocols::cow_sift(emission.frames, out.record).stats;
    }
    return out;
}

} // namespace

SimulationResult simulate(const ScenarioConfig& cfg) {
    SimulationResult result;
    json doc;
    doc["meta"] = {{"format", "dprsim-result-v1"}, {"tool", "dprsim"}};
    doc["scenario"] = cfg.echo();
    doc["fsg_warnings"] = json::array();
    doc["baseline"] = nullptr;
    doc["feasibility"] = nullptr;
    doc["divergence"] = nullptr;
    doc["record"] = nullptr;

    if (cfg.mode == RunMode::honest) {
        RunArtifacts run = run_honest(cfg, cfg.seed);
        result.statistics = run.stats;
        doc["statistics"] = statistics_to_json(run.stats);
        if (cfg.emit_record) doc["record"] = record_to_json(run.record);
    } else {
        analysis::FeasibilityReport feasibility;
        RunArtifacts attacked = run_attacked(cfg, cfg.seed, feasibility);
        const std::uint64_t baseline_seed = cfg.seed ^ kHonestBaselineSeedXor;
        RunArtifacts baseline = run_honest(cfg, baseline_seed);
        const analysis::DivergenceReport divergence =
            analysis::compare_statistics(baseline.stats, attacked.stats, cfg.z_star);

        result.statistics = attacked.stats;
        result.baseline_statistics = baseline.stats;
        result.feasibility = feasibility;
        result.divergence = divergence;
        result.fsg_warnings = attacked.fsg_warnings;

        doc["statistics"] = statistics_to_json(attacked.stats);
        doc["baseline"] = {{"seed", baseline_seed},
                           {"statistics", statistics_to_json(baseline.stats)}};
        doc["feasibility"] = feasibility_to_json(feasibility);
        doc["divergence"] = divergence_to_json(divergence);
        doc["fsg_warnings"] = attacked.fsg_warnings;
        if (cfg.emit_record) doc["record"] = record_to_json(attacked.record);
    }
    result.document = std::move(doc);
    return result;
}

// --- serialization -------------------------------------------------------------

json statistics_to_json(const RunStatistics& stats) {
    json clicks = json::object();
    json rates = json::object();
    const std::vector<DetectorId> ids =
        stats.protocol == Protocol::dps
            ? std::vector<DetectorId>{DetectorId::D0, DetectorId::D1}
            : std::vector<DetectorId>{DetectorId::DB, DetectorId::DM1, DetectorId::DM2};
    for (DetectorId id : ids) {
        auto it = stats.clicks_by_detector.find(id);
        clicks[protocols::to_string(id)] =
            it == stats.clicks_by_detector.end() ? 0 : it->second;
        rates[protocols::to_string(id)] = stats.rate(id);
    }

    json j;
    j["protocol"] = protocols::to_string(stats.protocol);
    j["slots"] = stats.slots;
    j["clicks"] = clicks;
    j["rates"] = rates;
    j["clicked_slots"] = stats.clicked_slots;
    j["raw_detection_rate"] = stats.raw_detection_rate();
    j["multi_click_slots"] = stats.multi_click_slots;
    j["double_click_rate"] = stats.double_click_rate();
    j["sifted_pairs"] = stats.sifted_pairs;
    j["sifted_errors"] = stats.sifted_errors;
    j["qber"] = stats.qber ? json(*stats.qber) : json();
    if (stats.protocol == Protocol::cow) {
        j["coherent_dm1_clicks"] = stats.coherent_dm1_clicks;
        j["coherent_dm2_clicks"] = stats.coherent_dm2_clicks;
        j["monitor_visibility"] =
            stats.monitor_visibility ? json(*stats.monitor_visibility) : json();
    }
    return j;
}

json record_to_json(const DetectionRecord& record) {
    json clicks = json::array();
    for (const auto& [slot, set] : record.clicks()) {
        json detectors = json::array();
        for (DetectorId id : set.to_vector()) detectors.push_back(protocols::to_string(id));
        clicks.push_back({{"slot", slot}, {"detectors", detectors}});
    }
    return json{{"length", record.length()}, {"clicks", clicks}};
}

json feasibility_to_json(const analysis::FeasibilityReport& report) {
    json entries = json::array();
    for (const auto& e : report.entries) {
        json entry = {{"name", e.name},
                      {"lhs_uw", e.lhs_uw},
                      {"rhs_uw", e.rhs_uw},
                      {"margin_uw", e.margin_uw},
                      {"satisfied", e.satisfied}};
        if (!e.note.empty()) entry["note"] = e.note;
        entries.push_back(entry);
    }
    return json{{"relaxed", report.relaxed_mode},
                {"overall", report.overall},
                {"entries", entries}};
}

json divergence_to_json(const analysis::DivergenceReport& report) {
    json metrics = json::array();
    for (const auto& m : report.metrics) {
        metrics.push_back(
            {{"name", m.name},
             {"honest", m.honest ? json(*m.honest) : json()},
             {"attacked", m.attacked ? json(*m.attacked) : json()},
             {"z", std::isfinite(m.z) ? json(m.z) : json()},
             {"comparison",
              m.comparison == analysis::MetricComparison::z_test ? "z_test" : "exact"},
             {"flagged", m.flagged}});
    }
    return json{{"z_threshold", report.z_threshold},
                {"verdict", report.verdict()},
                {"flagged", report.flagged},
                {"max_abs_z", std::isfinite(report.max_abs_z) ? json(report.max_abs_z)
                                                              : json()},
                {"metrics", metrics}};
}

// --- formatting -----------------------------------------------------------------

std::string format_power_uw(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", value);
    return buf;
}

std::string format_double(double value) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, ptr);
}

std::string table1_csv(std::span<const double> t_b_values, double p_never_m_uw,
                       double p_always_m_uw) {
    const auto rows = analysis::table1_rows(t_b_values, p_never_m_uw, p_always_m_uw);
    std::string csv = "t_b,p_never_b_min_uw,p_always_b_max_uw\n";
    for (const auto& row : rows) {
        csv += format_double(row.t_b);
        csv += ',';
        csv += format_power_uw(row.min_p_never_b_uw);
        csv += ',';
        csv += format_power_uw(row.max_p_always_b_uw);
        csv += '\n';
    }
    return csv;
}

// --- sweep ------------------------------------------------------------------------

namespace {

json::json_pointer pointer_for(const std::string& dotted_path) {
    std::string ptr = "/";
    for (char ch : dotted_path) ptr += ch == '.' ? '/' : ch;
    return json::json_pointer(ptr);
}

struct SweepPlan {
    std::vector<std::string> header;
    std::size_t stat_columns_start = 0;
    Protocol protocol = Protocol::dps;
    RunMode mode = RunMode::honest;
};

SweepPlan plan_columns(const SweepConfig& cfg, const ScenarioConfig& base) {
    SweepPlan plan;
    plan.protocol = base.protocol;
    plan.mode = base.mode;
    for (const auto& axis : cfg.axes) plan.header.push_back(axis.path);
    plan.stat_columns_start = plan.header.size();
    for (const char* col : {"grid_index", "replicate", "seed", "slots", "sifted_pairs",
                            "qber"}) {
        plan.header.emplace_back(col);
    }
    if (base.protocol == Protocol::dps) {
        plan.header.insert(plan.header.end(), {"rate_D0", "rate_D1"});
    } else {
        plan.header.insert(plan.header.end(), {"rate_DB", "rate_DM1", "rate_DM2"});
    }
    plan.header.insert(plan.header.end(), {"raw_detection_rate", "double_click_rate"});
    if (base.protocol == Protocol::cow) plan.header.emplace_back("visibility");
    if (base.mode == RunMode::attack) {
        plan.header.emplace_back("feasible_overall");
        if (base.protocol == Protocol::dps) {
            plan.header.emplace_back("margin_vacuum_slot_silence");
        } else {
            plan.header.insert(plan.header.end(),
                               {"margin_monitor_pair", "margin_data_silence",
                                "margin_monitor_silence"});
        }
        plan.header.insert(plan.header.end(), {"verdict", "max_abs_z"});
    }
    return plan;
}

std::string csv_row(const SweepPlan& plan, const std::vector<std::string>& axis_cells,
                    std::size_t grid_index, std::size_t replicate,
                    const ScenarioConfig& cfg, const SimulationResult& result) {
    std::vector<std::string> cells = axis_cells;
    cells.push_back(std::to_string(grid_index));
    cells.push_back(std::to_string(replicate));
    cells.push_back(std::to_string(cfg.seed));
    const RunStatistics& stats = result.statistics;
    cells.push_back(std::to_string(stats.slots));
    cells.push_back(std::to_string(stats.sifted_pairs));
    cells.push_back(stats.qber ? format_double(*stats.qber) : "");
    const std::vector<DetectorId> ids =
        plan.protocol == Protocol::dps
            ? std::vector<DetectorId>{DetectorId::D0, DetectorId::D1}
            : std::vector<DetectorId>{DetectorId::DB, DetectorId::DM1, DetectorId::DM2};
    for (DetectorId id : ids) cells.push_back(format_double(stats.rate(id)));
    cells.push_back(format_double(stats.raw_detection_rate()));
    cells.push_back(format_double(stats.double_click_rate()));
    if (plan.protocol == Protocol::cow) {
        cells.push_back(stats.monitor_visibility ? format_double(*stats.monitor_visibility)
                                                 : "");
    }
    if (plan.mode == RunMode::attack) {
        const auto& feasibility = *result.feasibility;
        cells.push_back(feasibility.overall ? "1" : "0");
        for (const auto& entry : feasibility.entries) {
            cells.push_back(format_power_uw(entry.margin_uw));
        }
        cells.push_back(result.divergence->verdict());
        cells.push_back(std::isfinite(result.divergence->max_abs_z)
                            ? format_double(result.divergence->max_abs_z)
                            : "inf");
    }

    std::string row;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i > 0) row += ',';
        row += cells[i];
    }
    return row;
}

} // namespace

SweepConfig parse_sweep_config(const json& j) {
    Cursor root{&j, ""};
    if (!j.is_object()) root.fail("sweep config must be a JSON object");
    SweepConfig cfg;
    cfg.base = *root.child("base").node;
    if (auto r = root.maybe("replicates")) cfg.replicates = r->uinteger();
    if (cfg.replicates == 0) root.child("replicates").fail("must be >= 1");

    Cursor axes = root.child("axes");
    if (!axes.node->is_array() || axes.node->empty()) {
        axes.fail("expected a non-empty array of axes");
    }
    for (std::size_t i = 0; i < axes.node->size(); ++i) {
        Cursor axis{&(*axes.node)[i], "axes[" + std::to_string(i) + "]"};
        SweepAxis out;
        out.path = axis.child("field").str();
        if (out.path == "protocol" || out.path == "mode") {
            axis.child("field").fail("protocol and mode cannot be swept");
        }
        if (!cfg.base.contains(pointer_for(out.path))) {
            axis.child("field").fail("does not reference an existing base config field");
        }
        Cursor values = axis.child("values");
        if (!values.node->is_array() || values.node->empty()) {
            values.fail("expected a non-empty array of values");
        }
        for (const auto& v : *values.node) out.values.push_back(v);
        cfg.axes.push_back(std::move(out));
    }
    return cfg;
}

std::string run_sweep(const SweepConfig& cfg, unsigned threads) {
    const ScenarioConfig base = parse_scenario_config(cfg.base);
    const SweepPlan plan = plan_columns(cfg, base);
    const std::uint64_t master_seed = base.seed;

    std::size_t grid_points = 1;
    for (const auto& axis : cfg.axes) grid_points *= axis.values.size();
    const std::size_t total_rows = grid_points * cfg.replicates;

    std::vector<std::string> rows(total_rows);
    std::atomic<std::size_t> next{0};

    auto worker = [&]() {
        for (;;) {
            const std::size_t row_index = next.fetch_add(1);
            if (row_index >= total_rows) return;
            const std::size_t grid_index = row_index / cfg.replicates;
            const std::size_t replicate = row_index % cfg.replicates;

            // Decompose the grid index with the first axis outermost.
            std::vector<std::size_t> axis_index(cfg.axes.size());
            std::size_t rest = grid_index;
            for (std::size_t a = cfg.axes.size(); a-- > 0;) {
                axis_index[a] = rest % cfg.axes[a].values.size();
                rest /= cfg.axes[a].values.size();
            }

            json patched = cfg.base;
            std::vector<std::string> axis_cells;
            axis_cells.reserve(cfg.axes.size());
            for (std::size_t a = 0; a < cfg.axes.size(); ++a) {
                const json& value = cfg.axes[a].values[axis_index[a]];
                patched[pointer_for(cfg.axes[a].path)] = value;
                axis_cells.push_back(value.is_string() ? value.get<std::string>()
                                                       : value.dump());
            }

            ScenarioConfig point = parse_scenario_config(patched);
            point.seed = derive_seed(master_seed,
                                     grid_index * cfg.replicates + replicate);
            const SimulationResult result = simulate(point);
            rows[row_index] = csv_row(plan, axis_cells, grid_index, replicate, point,
                                      result);
        }
    };

    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    std::string csv;
    for (std::size_t i = 0; i < plan.header.size(); ++i) {
        if (i > 0) csv += ',';
        csv += plan.header[i];
    }
    csv += '\n';
    for (const auto& row : rows) {
        csv += row;
        csv += '\n';
    }
    return csv;
}

} // namespace dpr::cli
