#pragma once

// Certificates: each command embeds its instance, the operators it produced
// and a residual table. The table is always computed by compute_residuals()
// from the serialized certificate itself, so `verify` reruns exactly the same
// arithmetic on exactly the same doubles and reproduces every value.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cpdilate/io/instance.hpp"

namespace cpdilate::io {

inline constexpr const char* kCertificateFormat = "cpdilate-certificate/1";
inline constexpr const char* kVerificationFormat = "cpdilate-verification/1";
inline constexpr double kReproductionTol = 1e-12;

using ResidualTable = std::map<std::string, double>;
using VerdictTable = std::map<std::string, std::string>;

enum ExitStatus : int { kSuccess = 0, kVerdictFailure = 1, kInputError = 2 };

inline const std::vector<std::string>& certificate_commands() {
    static const std::vector<std::string> cmds{"check-cp", "dilate",  "equiv",        "dominate",
                                               "commutant", "rn",     "iso-roundtrip"};
    return cmds;
}

struct CommandOptions {
    std::optional<std::uint64_t> seed;  // overrides the instance seed
    Index samples = 16;                 // domination samples
    Index trials = 50;                  // iso-roundtrip trials
    bool timing = false;                // record wall-clock duration (breaks byte identity)
};

struct CommandResult {
    int status = kSuccess;
    Json certificate;
};

// ---------------------------------------------------------------------------
// Tolerance precedence: defaults < instance < CPDILATE_TOL_RES < flags

struct ToleranceFlags {
    std::optional<double> rank;
    std::optional<double> psd;
    std::optional<double> residual;
};

inline Tolerances effective_tolerances(const Tolerances& from_instance, const ToleranceFlags& flags,
                                       const char* env_residual) {
    Tolerances t = from_instance;
    if (env_residual && *env_residual) {
        char* end = nullptr;
        const double v = std::strtod(env_residual, &end);
        if (end == env_residual || *end != '\0') {
            throw Error(ErrorCode::SchemaError, std::string("CPDILATE_TOL_RES: not a number: ") + env_residual);
        }
        t.residual_tol = v;
    }
    if (flags.rank) t.rank_tol = *flags.rank;
    if (flags.psd) t.psd_tol = *flags.psd;
    if (flags.residual) t.residual_tol = *flags.residual;
    if (!t.valid()) throw Error(ErrorCode::SchemaError, "tolerances must lie in (0, 1e-2]");
    return t;
}

// ---------------------------------------------------------------------------
// Operator (de)serialization

inline Json dilation_to_json(const DilationData& d) {
    return Json{{"dim_H", d.dim_H()},
                {"dim_K", d.dim_K()},
                {"S", matrices_to_json(d.S)},
                {"W", matrices_to_json(d.W)},
                {"pi_phi", matrices_to_json(d.pi_phi)},
                {"pi_Phi", matrices_to_json(d.pi_Phi)},
                {"K_embedding", matrix_to_json(d.K_embedding)},
                {"K_components", matrices_to_json(d.K_components)}};
}

inline DilationData dilation_from_json(Reader& rd, const Json* j, const std::string& path,
                                       const ModuleCPMatrix& origin) {
    DilationData d;
    if (!j) return d;
    const Index n = origin.n();
    const Index h = origin.source().dim();
    const Index k = origin.target().dim();
    Index r = 0, s = 0;
    rd.integer(rd.field(*j, path, "dim_H"), path + "/dim_H", r);
    rd.integer(rd.field(*j, path, "dim_K"), path + "/dim_K", s);
    d.n = n;
    d.module = origin.module();
    d.source = origin.source();
    d.target = origin.target();
    d.origin = origin;
    rd.matrix_list(rd.field(*j, path, "S"), path + "/S", d.S, n, r, h);
    rd.matrix_list(rd.field(*j, path, "W"), path + "/W", d.W, n, s, k);
    rd.matrix_list(rd.field(*j, path, "pi_phi"), path + "/pi_phi", d.pi_phi, origin.module().algebra().dim(), r, r);
    rd.matrix_list(rd.field(*j, path, "pi_Phi"), path + "/pi_Phi", d.pi_Phi, origin.module().dim(), s, r);
    rd.matrix(rd.field(*j, path, "K_embedding"), path + "/K_embedding", d.K_embedding, n * k, s);
    rd.matrix_list(rd.field(*j, path, "K_components"), path + "/K_components", d.K_components, n, k);
    return d;
}

inline Json commutant_to_json(const std::vector<CommutantElement>& basis) {
    Json arr = Json::array();
    for (const auto& e : basis) arr.push_back(Json{{"T", matrix_to_json(e.T)}, {"N", matrix_to_json(e.N)}});
    return arr;
}

inline std::vector<CommutantElement> commutant_from_json(Reader& rd, const Json* j, const std::string& path, Index r,
                                                         Index s) {
    std::vector<CommutantElement> out;
    if (!j) return out;
    if (!j->is_array()) {
        rd.fail(path, "expected an array of {T,N}");
        return out;
    }
    for (std::size_t i = 0; i < j->size(); ++i) {
        const std::string p = path + "/" + std::to_string(i);
        CommutantElement e;
        rd.matrix(rd.field((*j)[i], p, "T"), p + "/T", e.T, r, r);
        rd.matrix(rd.field((*j)[i], p, "N"), p + "/N", e.N, s, s);
        out.push_back(std::move(e));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Residuals

namespace detail {

inline void dilation_residuals(ResidualTable& t, const std::string& prefix, const DilationData& d,
                               const ModuleCPMatrix& origin, const Tolerances& tol) {
    const ReconstructionResidual rr = reconstruction_residual(d, origin.scalar_part(), origin);
    const RepresentationResidual rep = representation_residual(d);
    const MinimalityReport mr = minimality_report(d, tol);
    t[prefix + "res1"] = rr.res1;
    t[prefix + "res2"] = rr.res2;
    t[prefix + "multiplicative"] = rep.multiplicative;
    t[prefix + "adjoint"] = rep.adjoint;
    t[prefix + "unital"] = rep.unital;
    t[prefix + "module_form"] = rep.module_form;
    t[prefix + "right_action"] = rep.right_action;
    t[prefix + "w_partition"] = rep.w_partition;
    t[prefix + "w_components"] = rep.w_components;
    t[prefix + "dim_H"] = static_cast<double>(d.dim_H());
    t[prefix + "dim_K"] = static_cast<double>(d.dim_K());
    t[prefix + "h_span_rank"] = static_cast<double>(mr.h_span_rank);
    t[prefix + "k_span_rank"] = static_cast<double>(mr.k_span_rank);
    t[prefix + "nondegenerate"] = nondegeneracy_check(d, tol) ? 1.0 : 0.0;
}

inline bool dilation_valid(const ResidualTable& t, const std::string& prefix, const Tolerances& tol) {
    for (const char* key : {"res1", "res2", "multiplicative", "adjoint", "unital", "module_form", "right_action",
                            "w_partition", "w_components"}) {
        if (t.at(prefix + key) > tol.residual_tol) return false;
    }
    return true;
}

inline bool dilation_minimal(const ResidualTable& t, const std::string& prefix) {
    return t.at(prefix + "h_span_rank") == t.at(prefix + "dim_H") &&
           t.at(prefix + "k_span_rank") == t.at(prefix + "dim_K");
}

inline void domination_residuals(ResidualTable& t, const ModuleCPMatrix& sub, const ModuleCPMatrix& sup,
                                 Index samples, std::uint64_t seed, const Tolerances& tol) {
    const DominationResult dom = domination_check(sub, sup, samples, tol, seed);
    t["min_sampled_eigenvalue"] = dom.min_sampled_eigenvalue;
    t["difference_choi_min"] = dom.difference_choi_min;
}

inline DominationVerdict domination_verdict(const ResidualTable& t, const Tolerances& tol) {
    if (t.at("min_sampled_eigenvalue") < -tol.psd_tol) return DominationVerdict::Refuted;
    if (t.at("difference_choi_min") >= -tol.psd_tol) return DominationVerdict::Certified;
    return DominationVerdict::Undecided;
}

inline double generator_map_residual(const CMatrix& map, const CMatrix& in, const CMatrix& out) {
    if (map.rows() != out.rows() || map.cols() != in.rows()) {
        throw Error(ErrorCode::DimensionMismatch, "generator map shape");
    }
    return in.cols() == 0 ? 0.0 : (map * in - out).norm();
}

inline double joint_min(const CMatrix& a, const CMatrix& b, const Tolerances& tol) {
    return min_eigenvalue(block_diag(std::vector<CMatrix>{a, b}), tol);
}

inline double joint_max(const CMatrix& a, const CMatrix& b, const Tolerances& tol) {
    return max_eigenvalue(block_diag(std::vector<CMatrix>{a, b}), tol);
}

struct CertContext {
    std::string command;
    Instance instance;
    Tolerances tol;
    std::uint64_t seed = 0;
    Index samples = 16;
    Index trials = 0;
};

inline CertContext read_context(const Json& cert) {
    std::vector<std::string> errors;
    Reader rd(errors);
    CertContext c;
    std::string format;
    rd.string(rd.field(cert, "", "format"), "/format", format);
    if (!errors.empty()) throw Error(ErrorCode::SchemaError, join_errors(errors));
    if (format != kCertificateFormat) {
        throw Error(ErrorCode::VersionUnsupported, "certificate format \"" + format + "\"");
    }
    rd.string(rd.field(cert, "", "command"), "/command", c.command);
    const Json* inst = rd.field(cert, "", "instance");
    if (!errors.empty()) throw Error(ErrorCode::SchemaError, join_errors(errors));
    c.instance = parse_instance(*inst);
    const Json* t = rd.field(cert, "", "tolerances");
    if (t) {
        rd.number(rd.field(*t, "/tolerances", "rank"), "/tolerances/rank", c.tol.rank_tol);
        rd.number(rd.field(*t, "/tolerances", "psd"), "/tolerances/psd", c.tol.psd_tol);
        rd.number(rd.field(*t, "/tolerances", "residual"), "/tolerances/residual", c.tol.residual_tol);
    }
    if (const Json* p = rd.field(cert, "", "parameters")) {
        const Json* s = rd.field(*p, "/parameters", "seed");
        if (s && is_seed(*s)) c.seed = s->get<std::uint64_t>();
        else if (s) rd.fail("/parameters/seed", "expected a non-negative integer");
        rd.integer(rd.field(*p, "/parameters", "samples"), "/parameters/samples", c.samples);
        if (const Json* tr = rd.field(*p, "/parameters", "trials", false))
            rd.integer(tr, "/parameters/trials", c.trials);
    }
    if (!errors.empty()) throw Error(ErrorCode::SchemaError, join_errors(errors));
    return c;
}

inline const ModuleCPMatrix& need_Phi(const Instance& inst) {
    if (!inst.Phi) throw Error(ErrorCode::SchemaError, "/Phi: required by this command");
    return *inst.Phi;
}

inline const ModuleCPMatrix& need_pair(const Instance& inst) {
    if (!inst.pair) throw Error(ErrorCode::SchemaError, "/pair: required by this command");
    return *inst.pair;
}

inline void throw_if(const std::vector<std::string>& errors) {
    if (!errors.empty()) throw Error(ErrorCode::SchemaError, join_errors(errors));
}

}  // namespace detail

/// Every residual of a certificate, from its embedded instance and operators only.
inline ResidualTable compute_residuals(const Json& cert) {
    using namespace detail;
    const CertContext c = read_context(cert);
    const Instance& inst = c.instance;
    const Tolerances& tol = c.tol;
    std::vector<std::string> errors;
    Reader rd(errors);
    const Json empty = Json::object();
    const Json* ops = cert.contains("operators") ? &cert["operators"] : &empty;
    ResidualTable t;

    if (c.command == "check-cp") {
        const CpReport cp = cp_report(inst.phi, tol);
        t["choi_min_eigenvalue"] = cp.min_eigenvalue;
        t["choi_hermiticity"] = cp.hermiticity_residual;
        t["pairing_residual"] = hermiticity_pairing_residual(inst.phi);
    } else if (c.command == "dilate") {
        const ModuleCPMatrix& Phi = need_Phi(inst);
        const DilationData d = dilation_from_json(rd, rd.field(*ops, "/operators", "dilation"), "/operators/dilation", Phi);
        throw_if(errors);
        t["compatibility"] = compatibility_residual(Phi);
        dilation_residuals(t, "", d, Phi, tol);
    } else if (c.command == "equiv") {
        const ModuleCPMatrix& A = need_Phi(inst);
        const ModuleCPMatrix& B = need_pair(inst);
        const DilationData da = dilation_from_json(rd, rd.field(*ops, "/operators", "dilation"), "/operators/dilation", A);
        const DilationData db =
            dilation_from_json(rd, rd.field(*ops, "/operators", "pair_dilation"), "/operators/pair_dilation", B);
        CMatrix U1, U2;
        rd.matrix(rd.field(*ops, "/operators", "U1"), "/operators/U1", U1);
        rd.matrix(rd.field(*ops, "/operators", "U2"), "/operators/U2", U2);
        throw_if(errors);
        t["equivalence_residual"] = equivalence_residual(A, B);
        dilation_residuals(t, "a_", da, A, tol);
        dilation_residuals(t, "b_", db, B, tol);
        t["u1_map"] = generator_map_residual(U1, h_generators(da), h_generators(db));
        t["u2_map"] = generator_map_residual(U2, k_generators(da), k_generators(db));
        t["u1_unitarity"] = unitarity_residual(U1);
        t["u2_unitarity"] = unitarity_residual(U2);
        double s_res = 0.0, w_res = 0.0, p_res = 0.0, P_res = 0.0;
        for (Index i = 0; i < da.n; ++i) {
            s_res = std::max(s_res, max_abs(U1 * da.S[i] - db.S[i]));
            w_res = std::max(w_res, max_abs(U2 * da.W[i] - db.W[i]));
        }
        for (std::size_t u = 0; u < da.pi_phi.size(); ++u)
            p_res = std::max(p_res, max_abs(U1 * da.pi_phi[u] - db.pi_phi[u] * U1));
        for (std::size_t b = 0; b < da.pi_Phi.size(); ++b)
            P_res = std::max(P_res, max_abs(U2 * da.pi_Phi[b] - db.pi_Phi[b] * U1));
        t["s_intertwining"] = s_res;
        t["pi_phi_intertwining"] = p_res;
        t["pi_Phi_intertwining"] = P_res;
        t["w_intertwining"] = w_res;
    } else if (c.command == "dominate") {
        domination_residuals(t, need_pair(inst), need_Phi(inst), c.samples, c.seed, tol);
    } else if (c.command == "commutant") {
        const ModuleCPMatrix& Phi = need_Phi(inst);
        const DilationData d = dilation_from_json(rd, rd.field(*ops, "/operators", "dilation"), "/operators/dilation", Phi);
        throw_if(errors);
        const auto basis =
            commutant_from_json(rd, rd.field(*ops, "/operators", "commutant_basis"), "/operators/commutant_basis",
                                d.dim_H(), d.dim_K());
        throw_if(errors);
        dilation_residuals(t, "", d, Phi, tol);
        t["commutant_dim"] = static_cast<double>(basis.size());
        double comm = 0.0, alg = 0.0, ntr = 0.0, ortho = 0.0;
        for (std::size_t p = 0; p < basis.size(); ++p) {
            comm = std::max(comm, commutant_residual(d, basis[p].T, basis[p].N));
            alg = std::max(alg, algebra_commutation_residual(d, basis[p].T));
            ntr = std::max(ntr, max_abs(complete_from_T(d, basis[p].T, tol) - basis[p].N));
            for (std::size_t q = 0; q < basis.size(); ++q) {
                const Complex ip = (basis[p].T.adjoint() * basis[q].T).trace() + (basis[p].N.adjoint() * basis[q].N).trace();
                ortho = std::max(ortho, std::abs(ip - Complex(p == q ? 1.0 : 0.0)));
            }
        }
        t["commutant_residual"] = comm;
        t["algebra_commutation"] = alg;
        t["n_from_t"] = ntr;
        t["orthonormality"] = ortho;
        t["closure"] = commutant_closure_residual(basis);
    } else if (c.command == "rn") {
        const ModuleCPMatrix& Phi = need_Phi(inst);
        const ModuleCPMatrix& Psi = need_pair(inst);
        domination_residuals(t, Psi, Phi, c.samples, c.seed, tol);
        if (ops->contains("R")) {
            const DilationData d = dilation_from_json(rd, rd.field(*ops, "/operators", "dilation"), "/operators/dilation", Phi);
            const DilationData dp =
                dilation_from_json(rd, rd.field(*ops, "/operators", "pair_dilation"), "/operators/pair_dilation", Psi);
            CMatrix R, Q, D1, D2;
            rd.matrix(rd.field(*ops, "/operators", "R"), "/operators/R", R);
            rd.matrix(rd.field(*ops, "/operators", "Q"), "/operators/Q", Q);
            rd.matrix(rd.field(*ops, "/operators", "Delta1"), "/operators/Delta1", D1, d.dim_H(), d.dim_H());
            rd.matrix(rd.field(*ops, "/operators", "Delta2"), "/operators/Delta2", D2, d.dim_K(), d.dim_K());
            throw_if(errors);
            dilation_residuals(t, "", d, Phi, tol);
            dilation_residuals(t, "psi_", dp, Psi, tol);
            t["r_map"] = generator_map_residual(R, h_generators(d), h_generators(dp));
            t["q_map"] = generator_map_residual(Q, k_generators(d), k_generators(dp));
            t["delta1_product"] = max_abs(R.adjoint() * R - D1);
            t["delta2_product"] = max_abs(Q.adjoint() * Q - D2);
            t["commutant_residual"] = commutant_residual(d, D1, D2);
            t["spectrum_min"] = joint_min(D1, D2, tol);
            t["spectrum_max"] = joint_max(D1, D2, tol);
            if (t["commutant_residual"] <= tol.residual_tol && t["spectrum_min"] >= -tol.psd_tol) {
                t["equivalence_residual"] = equivalence_residual(derivative_inverse(d, D1, D2, tol), Psi);
            }
        }
    } else if (c.command == "iso-roundtrip") {
        const ModuleCPMatrix& Phi = need_Phi(inst);
        const DilationData d = dilation_from_json(rd, rd.field(*ops, "/operators", "dilation"), "/operators/dilation", Phi);
        throw_if(errors);
        const auto basis =
            commutant_from_json(rd, rd.field(*ops, "/operators", "commutant_basis"), "/operators/commutant_basis",
                                d.dim_H(), d.dim_K());
        const Json* trials = rd.field(*ops, "/operators", "trials");
        throw_if(errors);
        dilation_residuals(t, "", d, Phi, tol);
        t["commutant_dim"] = static_cast<double>(basis.size());
        t["closure"] = commutant_closure_residual(basis);
        double rt = 0.0, rn = 0.0, comm = 0.0, eq = 0.0, lo = 1.0, hi = 0.0, order_gap = 0.0, z_comm = 0.0;
        double certified = 0, undecided = 0, refuted = 0;
        if (!trials->is_array()) rd.fail("/operators/trials", "expected an array");
        throw_if(errors);
        for (std::size_t k = 0; k < trials->size(); ++k) {
            const std::string p = "/operators/trials/" + std::to_string(k);
            const Json& tj = (*trials)[k];
            CommutantElement z2, z1;
            CMatrix D1, D2;
            const Index r = d.dim_H(), s = d.dim_K();
            rd.matrix(rd.field(tj, p, "T2"), p + "/T2", z2.T, r, r);
            rd.matrix(rd.field(tj, p, "N2"), p + "/N2", z2.N, s, s);
            rd.matrix(rd.field(tj, p, "T1"), p + "/T1", z1.T, r, r);
            rd.matrix(rd.field(tj, p, "N1"), p + "/N1", z1.N, s, s);
            rd.matrix(rd.field(tj, p, "Delta1"), p + "/Delta1", D1, r, r);
            rd.matrix(rd.field(tj, p, "Delta2"), p + "/Delta2", D2, s, s);
            throw_if(errors);
            rt = std::max(rt, max_abs(D1 - z2.T));
            rn = std::max(rn, max_abs(D2 - z2.N));
            const double c_d = commutant_residual(d, D1, D2);
            comm = std::max(comm, c_d);
            z_comm = std::max({z_comm, commutant_residual(d, z2.T, z2.N), commutant_residual(d, z1.T, z1.N)});
            lo = std::min(lo, joint_min(D1, D2, tol));
            hi = std::max(hi, joint_max(D1, D2, tol));
            order_gap = std::min(order_gap, joint_min(z2.T - z1.T, z2.N - z1.N, tol));
            const ModuleCPMatrix psi2 = derivative_inverse(d, z2.T, z2.N, tol);
            if (c_d <= tol.residual_tol && joint_min(D1, D2, tol) >= -tol.psd_tol) {
                eq = std::max(eq, equivalence_residual(derivative_inverse(d, D1, D2, tol), psi2));
            } else {
                eq = std::max(eq, 1.0);
            }
            const ModuleCPMatrix psi1 = derivative_inverse(d, z1.T, z1.N, tol);
            const DominationResult dom = domination_check(psi1, psi2, c.samples, tol,
                                                          derive_seed(c.seed, 2000003u + static_cast<std::uint64_t>(k)));
            if (dom.verdict == DominationVerdict::Certified) ++certified;
            else if (dom.verdict == DominationVerdict::Refuted) ++refuted;
            else ++undecided;
        }
        t["trials"] = static_cast<double>(trials->size());
        t["max_roundtrip_T"] = rt;
        t["max_roundtrip_N"] = rn;
        t["max_commutant_residual"] = comm;
        t["max_sample_commutant_residual"] = z_comm;
        t["max_equivalence_residual"] = eq;
        t["spectrum_min"] = trials->empty() ? 0.0 : lo;
        t["spectrum_max"] = trials->empty() ? 0.0 : hi;
        t["order_gap_min"] = order_gap;
        t["order_certified"] = certified;
        t["order_undecided"] = undecided;
        t["order_refuted"] = refuted;
    } else {
        throw Error(ErrorCode::SchemaError, "/command: unknown command \"" + c.command + "\"");
    }
    return t;
}

/// Verdicts and exit status, derived only from the residual table.
inline std::pair<VerdictTable, int> derive_verdicts(const std::string& command, const ResidualTable& t,
                                                    const Tolerances& tol) {
    using namespace detail;
    VerdictTable v;
    bool ok = true;
    const double rt = tol.residual_tol;
    if (command == "check-cp") {
        const bool cp = t.at("choi_hermiticity") <= rt && t.at("choi_min_eigenvalue") >= -tol.psd_tol;
        v["cp"] = cp ? "CP" : "NOT_CP";
        ok = cp;
    } else if (command == "dilate") {
        const bool valid = dilation_valid(t, "", tol) && t.at("compatibility") <= rt;
        const bool minimal = dilation_minimal(t, "");
        v["dilation"] = valid ? "VALID" : "RESIDUAL_FAILURE";
        v["minimality"] = minimal ? "MINIMAL" : "NOT_MINIMAL";
        v["nondegeneracy"] = t.at("nondegenerate") == 1.0 ? "NONDEGENERATE" : "NOT_NONDEGENERATE";
        ok = valid && minimal;
    } else if (command == "equiv") {
        const bool form = t.at("equivalence_residual") <= rt;
        const bool dims = t.at("a_dim_H") == t.at("b_dim_H") && t.at("a_dim_K") == t.at("b_dim_K");
        bool witness = dims;
        for (const char* key : {"u1_map", "u2_map", "u1_unitarity", "u2_unitarity", "s_intertwining",
                                "pi_phi_intertwining", "pi_Phi_intertwining"})
            witness = witness && t.at(key) <= rt;
        v["equivalence_check"] = form ? "EQUIVALENT" : "NOT_EQUIVALENT";
        v["unitary_equivalence"] = witness ? "EQUIVALENT" : "NOT_EQUIVALENT";
        v["w_intertwining"] = t.at("w_intertwining") <= rt ? "HOLDS" : "FAILS";
        v["agreement"] = form == witness ? "AGREE" : "DISAGREE";
        ok = form && witness;
    } else if (command == "dominate") {
        const DominationVerdict d = domination_verdict(t, tol);
        v["domination"] = to_string(d);
        ok = d == DominationVerdict::Certified;
    } else if (command == "commutant") {
        const bool valid = t.at("commutant_residual") <= rt && t.at("closure") <= rt &&
                           t.at("algebra_commutation") <= rt && t.at("orthonormality") <= rt;
        v["commutant"] = valid ? "VALID" : "RESIDUAL_FAILURE";
        v["n_determined_by_t"] = t.at("n_from_t") <= rt ? "HOLDS" : "FAILS";
        ok = valid;
    } else if (command == "rn") {
        const DominationVerdict d = domination_verdict(t, tol);
        v["domination"] = to_string(d);
        if (d != DominationVerdict::Certified) {
            v["rn"] = "NOT_DOMINATED";
            ok = false;
        } else if (t.at("r_map") > rt || t.at("q_map") > rt) {
            v["rn"] = "NOT_WELL_DEFINED";
            ok = false;
        } else {
            const bool good = t.at("commutant_residual") <= rt && t.at("spectrum_min") >= -tol.psd_tol &&
                              t.at("spectrum_max") <= 1.0 + tol.psd_tol && t.count("equivalence_residual") &&
                              t.at("equivalence_residual") <= rt;
            v["rn"] = good ? "VALID" : "RESIDUAL_FAILURE";
            ok = good;
        }
    } else if (command == "iso-roundtrip") {
        const bool good = t.at("max_roundtrip_T") <= rt && t.at("max_roundtrip_N") <= rt &&
                          t.at("max_commutant_residual") <= rt && t.at("max_equivalence_residual") <= rt &&
                          t.at("spectrum_min") >= -tol.psd_tol && t.at("spectrum_max") <= 1.0 + tol.psd_tol &&
                          t.at("closure") <= rt;
        v["roundtrip"] = good ? "VALID" : "RESIDUAL_FAILURE";
        v["order"] = t.at("order_refuted") == 0.0 ? "PRESERVED" : "REFUTED";
        ok = good && t.at("order_refuted") == 0.0;
    } else {
        throw Error(ErrorCode::SchemaError, "unknown command \"" + command + "\"");
    }
    return {v, ok ? kSuccess : kVerdictFailure};
}

// ---------------------------------------------------------------------------
// Commands

namespace detail {

inline Json table_to_json(const ResidualTable& t) {
    Json j = Json::object();
    for (const auto& [k, val] : t) j[k] = val;
    return j;
}

inline Json iso_trial_to_json(const IsoTrial& tr) {
    return Json{{"T2", matrix_to_json(tr.z2.T)},        {"N2", matrix_to_json(tr.z2.N)},
                {"T1", matrix_to_json(tr.z1.T)},        {"N1", matrix_to_json(tr.z1.N)},
                {"Delta1", matrix_to_json(tr.Delta1)}, {"Delta2", matrix_to_json(tr.Delta2)}};
}

}  // namespace detail

/// Runs a construction command and assembles its certificate. Errors in the
/// input (schema, missing grids, failed preconditions) propagate as Error.
inline CommandResult run_command(const std::string& cmd, const Instance& inst, const CommandOptions& opts = {}) {
    using namespace detail;
    const auto start = std::chrono::steady_clock::now();
    const Tolerances& tol = inst.tol;
    const std::uint64_t seed = opts.seed.value_or(inst.seed);
    if (opts.samples < 0 || opts.trials < 0) throw Error(ErrorCode::SchemaError, "negative sample or trial count");

    Json cert;
    cert["format"] = kCertificateFormat;
    cert["command"] = cmd;
    cert["instance"] = instance_to_json(inst);
    cert["instance_sha256"] = sha256_hex(canonical_dump(cert["instance"]));
    cert["tolerances"] = tolerances_to_json(tol);
    Json params{{"seed", seed}, {"samples", opts.samples}};
    Json ops = Json::object();

    if (cmd == "check-cp") {
        // residuals only
    } else if (cmd == "dilate") {
        const DilationData d = build_dilation(inst.phi, need_Phi(inst), tol);
        ops["dilation"] = dilation_to_json(d);
    } else if (cmd == "equiv") {
        const DilationData a = build_dilation(inst.phi, need_Phi(inst), tol);
        const ModuleCPMatrix& B = need_pair(inst);
        const DilationData b = build_dilation(B.scalar_part(), B, tol);
        const EquivalenceWitness w = compare_dilations(a, b, tol, EquivalenceScope::Representation);
        ops["dilation"] = dilation_to_json(a);
        ops["pair_dilation"] = dilation_to_json(b);
        ops["U1"] = matrix_to_json(w.U1);
        ops["U2"] = matrix_to_json(w.U2);
    } else if (cmd == "dominate") {
        if (!need_pair(inst).same_shape(need_Phi(inst))) throw Error(ErrorCode::ShapeMismatch, "pair shape");
    } else if (cmd == "commutant") {
        const DilationData d = build_dilation(inst.phi, need_Phi(inst), tol);
        ops["dilation"] = dilation_to_json(d);
        ops["commutant_basis"] = commutant_to_json(commutant_basis(d, tol));
    } else if (cmd == "rn") {
        const ModuleCPMatrix& Phi = need_Phi(inst);
        const ModuleCPMatrix& Psi = need_pair(inst);
        const DominationResult dom = domination_check(Psi, Phi, opts.samples, tol, seed);
        if (dom.verdict == DominationVerdict::Certified) {
            const DilationData d = build_dilation(inst.phi, Phi, tol);
            const DilationData dp = build_dilation(Psi.scalar_part(), Psi, tol);
            const CMatrix R = lsq_define(h_generators(d), h_generators(dp), tol).map;
            const CMatrix Q = lsq_define(k_generators(d), k_generators(dp), tol).map;
            ops["dilation"] = dilation_to_json(d);
            ops["pair_dilation"] = dilation_to_json(dp);
            ops["R"] = matrix_to_json(R);
            ops["Q"] = matrix_to_json(Q);
            ops["Delta1"] = matrix_to_json(R.adjoint() * R);
            ops["Delta2"] = matrix_to_json(Q.adjoint() * Q);
        }
    } else if (cmd == "iso-roundtrip") {
        params["trials"] = opts.trials;
        const DilationData d = build_dilation(inst.phi, need_Phi(inst), tol);
        const IsoReport rep = order_iso_roundtrip(d, opts.trials, seed, tol, opts.samples);
        ops["dilation"] = dilation_to_json(d);
        ops["commutant_basis"] = commutant_to_json(commutant_basis(d, tol));
        Json trials = Json::array();
        for (const auto& tr : rep.records) trials.push_back(iso_trial_to_json(tr));
        ops["trials"] = std::move(trials);
    } else {
        throw Error(ErrorCode::SchemaError, "unknown command \"" + cmd + "\"");
    }
    cert["parameters"] = params;
    cert["operators"] = ops;

    // Residuals come from the serialized form, exactly as `verify` will see it.
    const Json reparsed = parse_json_text(canonical_dump(cert));
    const ResidualTable t = compute_residuals(reparsed);
    auto [verdicts, status] = derive_verdicts(cmd, t, tol);
    cert["residuals"] = table_to_json(t);
    cert["verdicts"] = verdicts;
    cert["status"] = status;
    if (opts.timing) {
        cert["duration_seconds"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    return {status, std::move(cert)};
}

// ---------------------------------------------------------------------------
// Verification

struct VerifyReport {
    bool hash_ok = false;
    bool residual_keys_match = false;
    bool verdicts_match = false;
    double max_abs_diff = 0.0;
    ResidualTable recomputed;
    int status = kVerdictFailure;
    Json to_json() const {
        Json j{{"format", kVerificationFormat},
               {"hash_ok", hash_ok},
               {"residual_keys_match", residual_keys_match},
               {"verdicts_match", verdicts_match},
               {"max_abs_diff", max_abs_diff},
               {"tolerance", kReproductionTol},
               {"recomputed", detail::table_to_json(recomputed)},
               {"status", status}};
        return j;
    }
};

/// Recomputes every residual of a certificate and compares with the record.
inline VerifyReport verify_certificate(const Json& cert) {
    VerifyReport r;
    const detail::CertContext c = detail::read_context(cert);
    r.hash_ok = cert.contains("instance_sha256") && cert["instance_sha256"].is_string() &&
                cert["instance_sha256"].get<std::string>() == sha256_hex(canonical_dump(cert["instance"]));
    r.recomputed = compute_residuals(cert);
    if (!cert.contains("residuals") || !cert["residuals"].is_object()) {
        throw Error(ErrorCode::SchemaError, "/residuals: missing");
    }
    const Json& rec = cert["residuals"];
    r.residual_keys_match = rec.size() == r.recomputed.size();
    for (const auto& [key, val] : r.recomputed) {
        if (!rec.contains(key) || !rec[key].is_number()) {
            r.residual_keys_match = false;
            continue;
        }
        r.max_abs_diff = std::max(r.max_abs_diff, std::abs(rec[key].get<double>() - val));
    }
    const auto [verdicts, status] = derive_verdicts(c.command, r.recomputed, c.tol);
    r.verdicts_match = cert.contains("verdicts") && cert["verdicts"] == Json(verdicts) && cert.contains("status") &&
                       cert["status"] == status;
    const bool ok = r.hash_ok && r.residual_keys_match && r.verdicts_match && r.max_abs_diff <= kReproductionTol;
    r.status = ok ? kSuccess : kVerdictFailure;
    return r;
}

// ---------------------------------------------------------------------------
// Reports

inline std::string emit_text_report(const Json& cert) {
    std::string out;
    char line[256];
    const auto add = [&](const std::string& k, const std::string& v) {
        std::snprintf(line, sizeof line, "%-32s %s\n", k.c_str(), v.c_str());
        out += line;
    };
    if (cert.contains("command")) add("command", cert["command"].get<std::string>());
    if (cert.contains("status")) add("status", std::to_string(cert["status"].get<int>()));
    if (cert.contains("instance_sha256")) add("instance", cert["instance_sha256"].get<std::string>());
    if (cert.contains("verdicts"))
        for (const auto& [k, v] : cert["verdicts"].items()) add("verdict." + k, v.get<std::string>());
    const char* table = cert.contains("residuals") ? "residuals" : "recomputed";
    if (cert.contains(table)) {
        for (const auto& [k, v] : cert[table].items()) {
            char num[64];
            std::snprintf(num, sizeof num, "%.6e", v.get<double>());
            add(k, num);
        }
    }
    for (const char* key : {"hash_ok", "residual_keys_match", "verdicts_match"})
        if (cert.contains(key)) add(key, cert[key].get<bool>() ? "true" : "false");
    if (cert.contains("max_abs_diff")) {
        char num[64];
        std::snprintf(num, sizeof num, "%.6e", cert["max_abs_diff"].get<double>());
        add("max_abs_diff", num);
    }
    return out;
}

inline std::string emit_report(const Json& doc, const std::string& format) {
    if (format == "json") return canonical_dump(doc);
    if (format == "text") return emit_text_report(doc);
    throw Error(ErrorCode::SchemaError, "format must be json or text");
}

}  // namespace cpdilate::io
