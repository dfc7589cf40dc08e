// cpdilate: batch front end over the dilation library.
//
//   cpdilate gen --seed 0 --algebra M2 --n 2 --mult 2 --out inst.json
//   cpdilate dilate --in inst.json --out cert.json
//   cpdilate verify cert.json
//
// Exit status: 0 verdict success, 1 verdict failure (certificate still
// written), 2 input error.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "cpdilate/io/certificate.hpp"

namespace {

using namespace cpdilate;
using namespace cpdilate::io;

std::string read_input(const std::string& path) {
    if (path.empty() || path == "-") {
        std::stringstream buf;
        buf << std::cin.rdbuf();
        return buf.str();
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_output(const std::string& path, const std::string& bytes) {
    if (path.empty() || path == "-") {
        std::cout << bytes << std::flush;
        return;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
    out << bytes;
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + path);
}

struct CommonFlags {
    std::string in;
    std::string out;
    std::optional<std::uint64_t> seed;
    ToleranceFlags tol;
    Index samples = 16;
    Index trials = 50;
    std::string format = "json";
    bool timing = false;
};

void add_common(CLI::App* sub, CommonFlags& f) {
    sub->add_option("--in", f.in, "instance file (default stdin)");
    sub->add_option("--out", f.out, "certificate file (default stdout)");
    sub->add_option("--seed", f.seed, "seed overriding the instance seed");
    sub->add_option("--tol-rank", f.tol.rank, "relative rank cutoff");
    sub->add_option("--tol-psd", f.tol.psd, "allowed negative eigenvalue");
    sub->add_option("--tol-res", f.tol.residual, "residual acceptance (overrides CPDILATE_TOL_RES)");
    sub->add_option("--samples", f.samples, "random samples for domination checks")->check(CLI::NonNegativeNumber);
    sub->add_option("--format", f.format, "json or text")->check(CLI::IsMember({"json", "text"}));
}

int run_certificate_command(const std::string& cmd, const CommonFlags& f) {
    Instance inst = parse_instance(parse_json_text(read_input(f.in)));
    inst.tol = effective_tolerances(inst.tol, f.tol, std::getenv("CPDILATE_TOL_RES"));
    CommandOptions opts;
    opts.seed = f.seed;
    opts.samples = f.samples;
    opts.trials = f.trials;
    opts.timing = f.timing;
    const CommandResult res = run_command(cmd, inst, opts);
    if (f.format == "json") {
        write_output(f.out, canonical_dump(res.certificate));
    } else {
        if (!f.out.empty() && f.out != "-") write_output(f.out, canonical_dump(res.certificate));
        std::cout << emit_text_report(res.certificate);
    }
    return res.status;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dilations and Radon-Nikodym derivatives of completely positive matrices"};
    app.require_subcommand(1);

    GenOptions gen;
    std::string gen_out;
    auto* g = app.add_subcommand("gen", "write a seeded instance file");
    g->add_option("--seed", gen.seed, "generator seed");
    g->add_option("--algebra", gen.algebra, "blocks, e.g. M2 or M1+M2");
    g->add_option("--chain", gen.chain, "seminorm chain, levels split by '|', e.g. 1|0,1");
    g->add_option("--module", gen.module, "self, free:m or rect:p1,p2");
    g->add_option("--n", gen.n, "matrix size n")->check(CLI::PositiveNumber);
    g->add_option("--mult", gen.mult, "dilation multiplicity")->check(CLI::PositiveNumber);
    g->add_option("--H", gen.H, "H flag dims, e.g. 1,2");
    g->add_option("--K", gen.K, "K flag dims, e.g. 2,3");
    g->add_option("--fixture", gen.fixture, "random, identity, two-copy, transpose, trace, zero");
    g->add_option("--pair", gen.pair, "second pair: none, rotated, scaled, derivative");
    g->add_option("--scale", gen.scale, "pair parameter");
    g->add_option("--out", gen_out, "instance file (default stdout)");

    std::map<std::string, CommonFlags> flags;
    std::map<std::string, CLI::App*> subs;
    const std::map<std::string, std::string> help{
        {"check-cp", "Choi-matrix test of complete n-positivity of [phi]"},
        {"dilate", "build the KSGNS dilation of ([phi],[Phi])"},
        {"equiv", "compare [Phi] with the pair: form equality and dilation unitary equivalence"},
        {"dominate", "decide pair <= [Phi]"},
        {"commutant", "basis of the commutant of the dilated module representation"},
        {"rn", "Radon-Nikodym derivative of the pair with respect to [Phi]"},
        {"iso-roundtrip", "sampled checks of the order isomorphism onto [0, I]"}};
    for (const auto& cmd : certificate_commands()) {
        auto* sub = app.add_subcommand(cmd, help.at(cmd));
        add_common(sub, flags[cmd]);
        sub->add_flag("--timing", flags[cmd].timing, "record wall-clock duration");
        subs[cmd] = sub;
    }
    subs["iso-roundtrip"]->add_option("--trials", flags["iso-roundtrip"].trials, "number of random trials")
        ->check(CLI::NonNegativeNumber);

    std::string cert_path;
    std::string verify_out;
    std::string verify_format = "json";
    auto* v = app.add_subcommand("verify", "recompute every residual of a certificate");
    v->add_option("certificate", cert_path, "certificate file");
    v->add_option("--in", cert_path, "certificate file");
    v->add_option("--out", verify_out, "verification report (default stdout)");
    v->add_option("--format", verify_format, "json or text")->check(CLI::IsMember({"json", "text"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kInputError;
    }

    try {
        if (g->parsed()) {
            write_output(gen_out, serialize_instance(generate_instance(gen)));
            return kSuccess;
        }
        if (v->parsed()) {
            const Json cert = parse_json_text(read_input(cert_path));
            const VerifyReport rep = verify_certificate(cert);
            write_output(verify_out, emit_report(rep.to_json(), verify_format));
            return rep.status;
        }
        for (const auto& [cmd, sub] : subs)
            if (sub->parsed()) return run_certificate_command(cmd, flags[cmd]);
    } catch (const Error& e) {
        std::cerr << "cpdilate: " << e.what() << "\n";
        return kInputError;
    } catch (const std::exception& e) {
        std::cerr << "cpdilate: " << e.what() << "\n";
        return kInputError;
    }
    return kInputError;
}
