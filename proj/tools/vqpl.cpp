// vqpl: check, run, explore, denote and compare VQPL programs.

#include "vqpl/denot.hpp"
#include "vqpl/eval.hpp"
#include "vqpl/json_io.hpp"
#include "vqpl/parser.hpp"
#include "vqpl/typecheck.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using namespace vqpl;

struct Options {
    std::string file;
    bool json = false;
    std::uint64_t seed = 0;
    int max_steps = 1000;
    double tol = 1e-9;
    int max_qubits = kDefaultMaxQubits;
    long node_budget = 1'000'000;
    int threads = 1;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::pair<int, int> line_col(const std::string& text, std::size_t off) {
    int line = 1, col = 1;
    for (std::size_t i = 0; i < off && i < text.size(); i++) {
        if (text[i] == '\n') {
            line++;
            col = 1;
        } else {
            col++;
        }
    }
    return {line, col};
}

void print_diagnostic(const std::string& file, const std::string& text, const std::string& kind,
                      const std::string& msg, Span sp, bool json) {
    if (json) {
        Json j{{"error", kind}, {"message", msg}, {"offset", sp.begin}};
        std::cout << j.dump() << "\n";
        return;
    }
    auto [line, col] = line_col(text, sp.begin);
    std::cerr << file << ":" << line << ":" << col << ": error";
    if (!kind.empty()) std::cerr << " [" << kind << "]";
    std::cerr << ": " << msg << "\n";
}

EvalOptions eval_opts(const Options& o) {
    EvalOptions e;
    e.max_qubits = o.max_qubits;
    e.node_budget = o.node_budget;
    return e;
}

int cmd_check(const Options& o) {
    std::string text = read_file(o.file);
    SourceFile sf = parse_program(text);
    Json results = Json::array();
    for (const auto& d : sf.decls) {
        CTermPtr linked = link_decl(sf, d.name);
        CTypePtr ty;
        try {
            ty = check_closed(linked);
        } catch (const TypeError& e) {
            print_diagnostic(o.file, text, err_kind_str(e.kind), e.what(), e.span, o.json);
            return 1;
        }
        if (d.annotation && !type_equal(ty, *d.annotation)) {
            print_diagnostic(o.file, text, "Mismatch",
                             d.name + " was declared " + print_type(*d.annotation) +
                                 " but has type " + print_type(ty),
                             d.span, o.json);
            return 1;
        }
        if (o.json) results.push_back(Json{{"name", d.name}, {"type", print_type(ty)}});
        else std::cout << d.name << " : " << print_type(ty) << "\n";
    }
    if (o.json) std::cout << Json{{"declarations", results}}.dump() << "\n";
    return 0;
}

CTermPtr load_main(const Options& o, std::string& text_out) {
    text_out = read_file(o.file);
    SourceFile sf = parse_program(text_out);
    if (!sf.has_main()) {
        Diagnostic d;
        d.message = "no `main` declaration in " + o.file;
        throw ParseError({d});
    }
    CTermPtr m = link_decl(sf, "main");
    check_closed(m);
    return m;
}

int cmd_run(const Options& o) {
    std::string text;
    CTermPtr m = load_main(o, text);
    SampleResult r = sample(Program{m}, o.seed, o.max_steps, eval_opts(o));
    if (!r.value) {
        if (o.json)
            std::cout << Json{{"timeout", true}, {"steps", o.max_steps}}.dump() << "\n";
        else std::cout << "timeout after " << o.max_steps << " steps\n";
        return 1;
    }
    if (o.json)
        std::cout << Json{{"value", program_display(*r.value)}, {"steps", r.steps}}.dump()
                  << "\n";
    else std::cout << program_display(*r.value) << "\n";
    return 0;
}

int cmd_explore(const Options& o) {
    std::string text;
    CTermPtr m = load_main(o, text);
    ExploreReport rep = explore(Program{m}, o.max_steps, eval_opts(o), o.threads);
    if (o.json) {
        std::cout << explore_report_to_json(rep).dump() << "\n";
    } else {
        std::map<std::string, double> shown;
        for (const auto& [key, p] : rep.dist.entries())
            shown[program_display(rep.reps.at(key))] += p;
        for (const auto& [v, p] : shown) std::cout << v << "\t" << p << "\n";
        std::cout << "residual\t" << rep.residual << "\n";
    }
    return 0;
}

int cmd_denote(const Options& o) {
    std::string text;
    CTermPtr m = load_main(o, text);
    DenotOptions dopts;
    dopts.oracle_steps = o.max_steps;
    dopts.eval = eval_opts(o);
    CTypePtr ty = check_closed(m);
    Json out;
    if (ty->kind == CTypeKind::QFun && is_value(m)) {
        Superoperator s = interp_value_channel(m, dopts);
        out = Json{{"kind", "channel"}, {"channel", superop_to_json(s)}};
    } else if (m->kind == CKind::Run) {
        AlgState s = interp_config(*m->config, dopts);
        SubDist d = denot_dist(Program{m}, dopts);
        out = Json{{"kind", "dist"},
                   {"dist", subdist_to_json(d)},
                   {"state", algstate_to_json(s)}};
    } else {
        SubDist d = denot_dist(Program{m}, dopts);
        out = Json{{"kind", "dist"}, {"dist", subdist_to_json(d)}};
    }
    if (o.json) {
        std::cout << out.dump() << "\n";
    } else {
        std::cout << out.dump(2) << "\n";
    }
    return 0;
}

int cmd_compare(const Options& o) {
    std::string text;
    CTermPtr m = load_main(o, text);
    DenotOptions dopts;
    dopts.oracle_steps = std::max(o.max_steps * 2, 2000);
    dopts.eval = eval_opts(o);
    AdequacyReport rep = adequacy_check(Program{m}, o.max_steps, o.tol, dopts);
    if (o.json) {
        std::cout << adequacy_report_to_json(rep).dump() << "\n";
    } else {
        std::cout << "tv = " << rep.tv << "  residual = " << rep.residual
                  << "  soundness dev = " << rep.soundness_max_dev << " over "
                  << rep.soundness_nodes << " nodes\n"
                  << (rep.pass ? "pass" : "FAIL") << " (tolerance " << rep.tol << " + residual)\n";
    }
    return rep.pass ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"VQPL reference interpreter and denotational oracle"};
    app.require_subcommand(1);

    Options o;
    auto add_common = [&](CLI::App* cmd, bool needs_file = true) {
        if (needs_file) cmd->add_option("file", o.file, "VQPL source file")->required();
        cmd->add_flag("--json", o.json, "machine-readable JSON output");
        cmd->add_option("--max-steps", o.max_steps, "reduction step bound");
        cmd->add_option("--max-qubits", o.max_qubits, "statevector capacity");
        cmd->add_option("--node-budget", o.node_budget, "exploration node budget");
    };

    CLI::App* check = app.add_subcommand("check", "type-check every declaration");
    add_common(check);

    CLI::App* run = app.add_subcommand("run", "sample one execution of main");
    add_common(run);
    run->add_option("--seed", o.seed, "PRNG seed (std::mt19937_64)");

    CLI::App* explore_cmd = app.add_subcommand("explore", "exhaustive weighted exploration");
    add_common(explore_cmd);
    explore_cmd->add_option("--threads", o.threads, "worker threads (default 1)");

    CLI::App* denote = app.add_subcommand("denote", "denotational interpretation of main");
    add_common(denote);

    CLI::App* compare = app.add_subcommand("compare", "adequacy check: denotation vs exploration");
    add_common(compare);
    compare->add_option("--tol", o.tol, "total-variation tolerance");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    std::string text;
    try {
        if (app.got_subcommand(check)) return cmd_check(o);
        if (app.got_subcommand(run)) return cmd_run(o);
        if (app.got_subcommand(explore_cmd)) return cmd_explore(o);
        if (app.got_subcommand(denote)) return cmd_denote(o);
        if (app.got_subcommand(compare)) return cmd_compare(o);
    } catch (const ParseError& e) {
        for (const auto& d : e.diagnostics) {
            try {
                text = read_file(o.file);
            } catch (...) {
            }
            print_diagnostic(o.file, text, "parse", d.message, d.span, o.json);
        }
        return 1;
    } catch (const TypeError& e) {
        try {
            text = read_file(o.file);
        } catch (...) {
        }
        print_diagnostic(o.file, text, err_kind_str(e.kind), e.what(), e.span, o.json);
        return 1;
    } catch (const std::exception& e) {
        if (o.json) std::cout << Json{{"error", "runtime"}, {"message", e.what()}}.dump() << "\n";
        else std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
