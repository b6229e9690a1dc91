// pkbq: ground, check, query and rank a weighted knowledge base.
//
// Exit codes: 0 ok, 1 I/O or usage, 2 parse / invalid input, 3 cap
// exceeded, 4 unsatisfiable hard constraints.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "pkb/engine.hpp"

namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kIo = 1, kParse = 2, kCap = 3, kUnsat = 4 };

struct Inputs {
    std::string config;
    bool oracle = false;
    std::string kb;
    std::string query;
    std::string synonyms;
    std::optional<double> theta_r;
    std::optional<std::size_t> topk;
    std::optional<std::size_t> cap;
    bool approx = false;
    std::string report;
    std::string candidate;
};

// Config file first, command-line flags on top.
pkb::EngineConfig load_config(const Inputs& in) {
    pkb::EngineConfig cfg;
    fs::path synonyms;
    if (!in.config.empty()) {
        cfg = pkb::parse_config(pkb::read_file(in.config));
        if (!cfg.synonyms_file.empty()) synonyms = fs::path(in.config).parent_path() / cfg.synonyms_file;
    }
    if (!in.synonyms.empty()) synonyms = in.synonyms;
    if (!synonyms.empty()) cfg.similarity.synonyms = pkb::parse_synonyms(pkb::read_file(synonyms));
    if (in.theta_r) cfg.similarity.theta_r = *in.theta_r;
    if (in.topk) cfg.topk = *in.topk;
    if (in.cap) cfg.enumeration_cap = *in.cap;
    cfg.validate();
    return cfg;
}

pkb::KnowledgeBase load_kb(const Inputs& in) { return pkb::parse_kb(pkb::read_file(in.kb)); }
pkb::Query load_query(const Inputs& in) { return pkb::parse_query(pkb::read_file(in.query)); }

void emit(const std::string& text, const std::string& path) {
    if (path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out || !(out << text)) throw pkb::IoError("cannot write " + path);
}

int cmd_ground(const Inputs& in) {
    auto cfg = load_config(in);
    auto kb = load_kb(in);
    if (in.oracle) {
        if (kb.facts.size() > 12) throw pkb::CapExceeded("--oracle grounding is limited to 12 facts");
        std::cout << pkb::ground_report_oracle(pkb::oracle::naive_ground(kb));
    } else {
        std::cout << pkb::ground_report(pkb::ground_fixpoint_prov(kb, pkb::grounding_options(cfg)));
    }
    return kOk;
}

int cmd_mis(const Inputs& in) {
    auto cfg = load_config(in);
    auto kb = load_kb(in);
    std::vector<std::set<pkb::GroundAtom>> mis;
    if (in.oracle) {
        if (kb.facts.size() > 12) throw pkb::CapExceeded("--oracle MIS search is limited to 12 facts");
        for (const auto& m : pkb::oracle::brute_mis(kb)) mis.push_back(m);
    } else {
        auto gkb = pkb::ground_fixpoint_prov(kb, pkb::grounding_options(cfg));
        for (const auto& m : pkb::minimal_inconsistent_subsets(gkb)) mis.emplace_back(m.begin(), m.end());
    }
    std::cout << pkb::mis_report(mis);
    return kOk;
}

int cmd_query(const Inputs& in) {
    auto cfg = load_config(in);
    auto answers = pkb::answer(load_kb(in), load_query(in), cfg, in.approx);
    std::cout << pkb::query_report(answers, in.approx);
    return kOk;
}

int cmd_rank(const Inputs& in) {
    auto cfg = load_config(in);
    if (in.oracle) cfg.enumeration_cap = std::min<std::size_t>(cfg.enumeration_cap, 16);
    auto r = pkb::rank(load_kb(in), load_query(in), cfg, in.approx, in.oracle);
    emit(pkb::rank_report(r, in.approx), in.report);
    return kOk;
}

int cmd_explain(const Inputs& in) {
    auto cfg = load_config(in);
    pkb::KnowledgeBase probe;
    try {
        probe = pkb::parse_kb(in.candidate);
    } catch (const pkb::ParseError& e) {
        throw pkb::ParseError(e.line(), std::string("candidate: ") + e.what());
    }
    if (probe.facts.size() != 1 || !probe.rules.empty())
        throw std::invalid_argument("candidate must be a single ground atom");
    auto r = pkb::rank(load_kb(in), load_query(in), cfg, in.approx);
    std::cout << pkb::explain_report(r, probe.facts.front().atom);
    return kOk;
}

template <class F>
int guarded(F&& f) {
    try {
        return f();
    } catch (const pkb::IoError& e) {
        std::cerr << "pkbq: " << e.what() << "\n";
        return kIo;
    } catch (const pkb::ParseError& e) {
        std::cerr << "pkbq: parse error: " << e.what() << "\n";
        return kParse;
    } catch (const pkb::CapExceeded& e) {
        std::cerr << "pkbq: cap exceeded: " << e.what() << "\n";
        return kCap;
    } catch (const pkb::Unsatisfiable& e) {
        std::cerr << "pkbq: unsatisfiable: " << e.what() << "\n";
        return kUnsat;
    } catch (const std::invalid_argument& e) {
        std::cerr << "pkbq: invalid input: " << e.what() << "\n";
        return kParse;
    } catch (const std::exception& e) {
        std::cerr << "pkbq: " << e.what() << "\n";
        return kIo;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Probabilistic knowledge-base query engine"};
    app.require_subcommand(1);
    Inputs in;
    app.add_option("--config", in.config, "engine configuration file (key = value)");
    app.add_flag("--oracle", in.oracle, "use the brute-force reference implementation (ground, mis, rank)");

    auto kb_opt = [&](CLI::App* sub) { sub->add_option("--kb", in.kb, "knowledge base file")->required(); };
    auto query_opts = [&](CLI::App* sub) {
        sub->add_option("--query", in.query, "query file")->required();
        sub->add_option("--synonyms", in.synonyms, "synonym table (a ~ b per line)");
        sub->add_option("--theta-r", in.theta_r, "similarity threshold");
        sub->add_option("--topk", in.topk, "matches kept per compiled query");
        sub->add_flag("--approx", in.approx, "approximate matching");
        sub->add_option("--cap", in.cap, "exact enumeration cap (atoms)");
    };

    auto* ground = app.add_subcommand("ground", "grounded atoms and provenance");
    kb_opt(ground);
    auto* mis = app.add_subcommand("mis", "minimal inconsistent subsets, one per line");
    kb_opt(mis);
    auto* query = app.add_subcommand("query", "candidates and their hypotheses");
    kb_opt(query);
    query_opts(query);
    auto* rank = app.add_subcommand("rank", "candidates ranked by possible-world probability");
    kb_opt(rank);
    query_opts(rank);
    rank->add_option("--report", in.report, "write the report to this file");
    auto* explain = app.add_subcommand("explain", "derivation chain for one candidate");
    explain->add_option("candidate", in.candidate, "ground candidate atom, e.g. answer(tweety)")->required();
    kb_opt(explain);
    query_opts(explain);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kOk : kIo;
    }
    if (in.oracle && (query->parsed() || explain->parsed())) {
        std::cerr << "pkbq: --oracle is supported by ground, mis and rank\n";
        return kIo;
    }

    if (ground->parsed()) return guarded([&] { return cmd_ground(in); });
    if (mis->parsed()) return guarded([&] { return cmd_mis(in); });
    if (query->parsed()) return guarded([&] { return cmd_query(in); });
    if (rank->parsed()) return guarded([&] { return cmd_rank(in); });
    return guarded([&] { return cmd_explain(in); });
}
