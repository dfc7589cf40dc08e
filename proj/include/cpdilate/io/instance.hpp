#pragma once

// Instance files ("cpdilate/1"): algebra, module, flags, the [phi] grid and
// optionally [Phi] and a second pair for comparison commands. Map grids are
// nested arrays grid[i][j][u] holding the value of entry (i,j) on the u-th
// basis element (matrix units for A, coordinate basis for M).

#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cpdilate/io/json.hpp"
#include "cpdilate/radon_nikodym.hpp"

namespace cpdilate::io {

inline constexpr const char* kInstanceVersion = "cpdilate/1";

struct Instance {
    CStarAlgebra algebra;
    HilbertModule module;
    FlagSpace H;
    std::optional<FlagSpace> K;
    Index n = 1;
    NPositiveMatrixMap phi;
    std::optional<ModuleCPMatrix> Phi;
    std::optional<ModuleCPMatrix> pair;  // second [Phi], its scalar part as [psi]
    Tolerances tol;
    std::uint64_t seed = 0;
};

// ---------------------------------------------------------------------------
// Serialization

inline Json module_to_json(const HilbertModule& m) {
    Json j{{"kind", std::string(to_string(m.kind()))}};
    if (m.kind() == ModuleKind::FreeModule) j["rank"] = m.rank();
    if (m.kind() == ModuleKind::RectModule) j["rows"] = m.block_rows();
    return j;
}

inline Json phi_grid_to_json(const NPositiveMatrixMap& phi) {
    const auto basis = algebra_basis(phi.algebra());
    Json grid = Json::array();
    for (Index i = 0; i < phi.n(); ++i) {
        Json row = Json::array();
        for (Index j = 0; j < phi.n(); ++j) {
            Json vals = Json::array();
            for (const auto& e : basis) vals.push_back(matrix_to_json(phi.apply(i, j, e)));
            row.push_back(std::move(vals));
        }
        grid.push_back(std::move(row));
    }
    return grid;
}

inline Json Phi_grid_to_json(const ModuleCPMatrix& Phi) {
    const auto basis = module_basis(Phi.module());
    Json grid = Json::array();
    for (Index i = 0; i < Phi.n(); ++i) {
        Json row = Json::array();
        for (Index j = 0; j < Phi.n(); ++j) {
            Json vals = Json::array();
            for (const auto& x : basis) vals.push_back(matrix_to_json(Phi.apply(i, j, x)));
            row.push_back(std::move(vals));
        }
        grid.push_back(std::move(row));
    }
    return grid;
}

inline Json tolerances_to_json(const Tolerances& t) {
    return Json{{"rank", t.rank_tol}, {"psd", t.psd_tol}, {"residual", t.residual_tol}};
}

inline Json instance_to_json(const Instance& inst) {
    Json j;
    j["version"] = kInstanceVersion;
    j["algebra"] = Json{{"block_dims", inst.algebra.block_dims()}, {"chain", inst.algebra.chain()}};
    j["module"] = module_to_json(inst.module);
    j["H"] = inst.H.flag_dims();
    if (inst.K) j["K"] = inst.K->flag_dims();
    j["n"] = inst.n;
    j["phi"] = phi_grid_to_json(inst.phi);
    if (inst.Phi) j["Phi"] = Phi_grid_to_json(*inst.Phi);
    if (inst.pair) {
        j["pair"] = Json{{"phi", phi_grid_to_json(inst.pair->scalar_part())}, {"Phi", Phi_grid_to_json(*inst.pair)}};
    }
    j["tolerances"] = tolerances_to_json(inst.tol);
    j["seed"] = inst.seed;
    return j;
}

inline std::string serialize_instance(const Instance& inst) {
    return canonical_dump(instance_to_json(inst));
}

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

inline std::optional<NPositiveMatrixMap> read_phi_grid(Reader& rd, const Json* j, const std::string& path, Index n,
                                                       const CStarAlgebra& alg, const FlagSpace& H) {
    if (!j) return std::nullopt;
    const Index h = H.dim();
    if (!j->is_array() || static_cast<Index>(j->size()) != n) {
        rd.fail(path, "expected " + std::to_string(n) + " rows");
        return std::nullopt;
    }
    bool good = true;
    std::vector<CMatrix> maps;
    for (Index i = 0; i < n; ++i) {
        const Json& row = (*j)[i];
        const std::string rp = path + "/" + std::to_string(i);
        if (!row.is_array() || static_cast<Index>(row.size()) != n) {
            rd.fail(rp, "expected " + std::to_string(n) + " entries");
            good = false;
            continue;
        }
        for (Index k = 0; k < n; ++k) {
            std::vector<CMatrix> vals;
            if (!rd.matrix_list(&row[k], rp + "/" + std::to_string(k), vals, alg.dim(), h, h)) {
                good = false;
                continue;
            }
            CMatrix m(h * h, alg.dim());
            for (Index u = 0; u < alg.dim(); ++u)
                for (Index s = 0; s < h; ++s)
                    for (Index t = 0; t < h; ++t) m(s * h + t, u) = vals[u](s, t);
            maps.push_back(std::move(m));
        }
    }
    if (!good) return std::nullopt;
    return NPositiveMatrixMap(n, alg, H, std::move(maps));
}

inline std::optional<ModuleCPMatrix> read_Phi_grid(Reader& rd, const Json* j, const std::string& path,
                                                   const NPositiveMatrixMap& phi, const HilbertModule& module,
                                                   const FlagSpace& H, const FlagSpace& K) {
    if (!j) return std::nullopt;
    const Index n = phi.n();
    const Index h = H.dim();
    const Index k = K.dim();
    if (!j->is_array() || static_cast<Index>(j->size()) != n) {
        rd.fail(path, "expected " + std::to_string(n) + " rows");
        return std::nullopt;
    }
    bool good = true;
    std::vector<CMatrix> maps;
    for (Index i = 0; i < n; ++i) {
        const Json& row = (*j)[i];
        const std::string rp = path + "/" + std::to_string(i);
        if (!row.is_array() || static_cast<Index>(row.size()) != n) {
            rd.fail(rp, "expected " + std::to_string(n) + " entries");
            good = false;
            continue;
        }
        for (Index c = 0; c < n; ++c) {
            std::vector<CMatrix> vals;
            if (!rd.matrix_list(&row[c], rp + "/" + std::to_string(c), vals, module.dim(), k, h)) {
                good = false;
                continue;
            }
            CMatrix m(k * h, module.dim());
            for (Index b = 0; b < module.dim(); ++b)
                for (Index s = 0; s < k; ++s)
                    for (Index t = 0; t < h; ++t) m(s * h + t, b) = vals[b](s, t);
            maps.push_back(std::move(m));
        }
    }
    if (!good) return std::nullopt;
    return ModuleCPMatrix(module, H, K, std::move(maps), phi);
}

inline std::optional<FlagSpace> read_flag(Reader& rd, const Json* j, const std::string& path, Index levels) {
    std::vector<Index> dims;
    if (!rd.index_list(j, path, dims)) return std::nullopt;
    if (static_cast<Index>(dims.size()) != levels) {
        rd.fail(path, "flag needs " + std::to_string(levels) + " levels (one per chain level)");
        return std::nullopt;
    }
    try {
        return FlagSpace(dims);
    } catch (const Error& e) {
        rd.fail(path, e.what());
        return std::nullopt;
    }
}

}  // namespace detail

struct ParseResult {
    std::optional<Instance> instance;
    std::vector<std::string> errors;
    bool version_unsupported = false;
};

/// Validates without throwing; every problem is reported with its JSON path.
inline ParseResult try_parse_instance(const Json& j) {
    ParseResult out;
    Reader rd(out.errors);
    if (!j.is_object()) {
        rd.fail("", "instance must be a JSON object");
        return out;
    }
    std::string version;
    if (!rd.string(rd.field(j, "", "version"), "/version", version)) return out;
    if (version != kInstanceVersion) {
        out.version_unsupported = true;
        rd.fail("/version", "unsupported version \"" + version + "\" (expected " + kInstanceVersion + ")");
        return out;
    }

    Instance inst;
    const Json* alg = rd.field(j, "", "algebra");
    std::vector<Index> block_dims;
    std::vector<std::vector<Index>> chain;
    bool alg_ok = alg && rd.index_list(rd.field(*alg, "/algebra", "block_dims"), "/algebra/block_dims", block_dims, 1);
    if (alg_ok) {
        if (const Json* c = rd.field(*alg, "/algebra", "chain", false)) {
            if (!c->is_array()) {
                rd.fail("/algebra/chain", "expected an array of block subsets");
                alg_ok = false;
            } else {
                for (std::size_t l = 0; l < c->size(); ++l) {
                    std::vector<Index> set;
                    alg_ok &= rd.index_list(&(*c)[l], "/algebra/chain/" + std::to_string(l), set);
                    chain.push_back(std::move(set));
                }
            }
        }
    }
    if (alg_ok) {
        try {
            inst.algebra = CStarAlgebra(block_dims, chain);
        } catch (const Error& e) {
            rd.fail("/algebra", e.what());
            alg_ok = false;
        }
    }
    if (!alg_ok) return out;

    bool ok = true;
    if (const Json* m = rd.field(j, "", "module")) {
        std::string kind;
        if (rd.string(rd.field(*m, "/module", "kind"), "/module/kind", kind)) {
            try {
                if (kind == "self") {
                    inst.module = HilbertModule::self(inst.algebra);
                } else if (kind == "free") {
                    Index rank = 0;
                    if (rd.integer(rd.field(*m, "/module", "rank"), "/module/rank", rank, 1))
                        inst.module = HilbertModule::free(inst.algebra, rank);
                    else ok = false;
                } else if (kind == "rect") {
                    std::vector<Index> rows;
                    if (rd.index_list(rd.field(*m, "/module", "rows"), "/module/rows", rows))
                        inst.module = HilbertModule::rect(inst.algebra, rows);
                    else ok = false;
                } else {
                    rd.fail("/module/kind", "must be self, free or rect");
                    ok = false;
                }
            } catch (const Error& e) {
                rd.fail("/module", e.what());
                ok = false;
            }
        } else {
            ok = false;
        }
    } else {
        ok = false;
    }

    const auto H = detail::read_flag(rd, rd.field(j, "", "H"), "/H", inst.algebra.levels());
    std::optional<FlagSpace> K;
    if (const Json* kj = rd.field(j, "", "K", false)) K = detail::read_flag(rd, kj, "/K", inst.algebra.levels());
    ok &= rd.integer(rd.field(j, "", "n"), "/n", inst.n, 1);

    if (const Json* t = rd.field(j, "", "tolerances", false)) {
        double v = 0.0;
        if (const Json* x = rd.field(*t, "/tolerances", "rank", false); x && rd.number(x, "/tolerances/rank", v))
            inst.tol.rank_tol = v;
        if (const Json* x = rd.field(*t, "/tolerances", "psd", false); x && rd.number(x, "/tolerances/psd", v))
            inst.tol.psd_tol = v;
        if (const Json* x = rd.field(*t, "/tolerances", "residual", false);
            x && rd.number(x, "/tolerances/residual", v))
            inst.tol.residual_tol = v;
        if (!inst.tol.valid()) rd.fail("/tolerances", "tolerances must lie in (0, 1e-2]");
    }
    if (const Json* s = rd.field(j, "", "seed", false)) {
        if (is_seed(*s)) inst.seed = s->get<std::uint64_t>();
        else rd.fail("/seed", "expected a non-negative integer");
    }
    if (!ok || !H) return out;
    inst.H = *H;
    inst.K = K;

    auto phi = detail::read_phi_grid(rd, rd.field(j, "", "phi"), "/phi", inst.n, inst.algebra, inst.H);
    if (!phi) return out;
    inst.phi = std::move(*phi);

    const Json* Phi = rd.field(j, "", "Phi", false);
    const Json* pair = rd.field(j, "", "pair", false);
    if ((Phi || pair) && !inst.K) {
        rd.fail("/K", "required when Phi or pair is present");
        return out;
    }
    if (Phi) inst.Phi = detail::read_Phi_grid(rd, Phi, "/Phi", inst.phi, inst.module, inst.H, *inst.K);
    if (pair) {
        auto psi = detail::read_phi_grid(rd, rd.field(*pair, "/pair", "phi"), "/pair/phi", inst.n, inst.algebra, inst.H);
        if (psi)
            inst.pair = detail::read_Phi_grid(rd, rd.field(*pair, "/pair", "Phi"), "/pair/Phi", *psi, inst.module,
                                              inst.H, *inst.K);
    }
    if (!rd.ok()) return out;
    out.instance = std::move(inst);
    return out;
}

inline Instance parse_instance(const Json& j) {
    ParseResult r = try_parse_instance(j);
    if (r.version_unsupported) throw Error(ErrorCode::VersionUnsupported, join_errors(r.errors));
    if (!r.instance) throw Error(ErrorCode::SchemaError, join_errors(r.errors));
    return std::move(*r.instance);
}

inline Json parse_json_text(const std::string& text) {
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw Error(ErrorCode::SchemaError, std::string("malformed JSON: ") + e.what());
    }
}

inline Instance parse_instance(std::istream& in) {
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_instance(parse_json_text(buf.str()));
}

// ---------------------------------------------------------------------------
// Seeded generation

struct GenOptions {
    std::uint64_t seed = 0;
    std::string algebra = "M2";  // "M2", "M1+M2", ...
    std::string chain;           // "1|0,1": levels separated by '|', 0-based blocks
    std::string module = "self"; // "self", "free:2", "rect:1,2"
    Index n = 1;
    Index mult = 1;
    std::string H;               // "1,2"; default one new dimension per level
    std::string K;               // default: smallest feasible increments
    std::string fixture = "random";  // random, identity, transpose, trace, two-copy, zero
    std::string pair = "none";       // none, rotated, scaled, derivative
    double scale = 0.0;              // pair parameter (scaled: 2, derivative: 0.5)
};

namespace detail {

inline std::vector<Index> parse_index_csv(const std::string& s, const std::string& what) {
    std::vector<Index> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            std::size_t used = 0;
            const long long v = std::stoll(tok, &used);
            if (used != tok.size() || v < 0) throw std::invalid_argument(tok);
            out.push_back(static_cast<Index>(v));
        } catch (const std::exception&) {
            throw Error(ErrorCode::SchemaError, what + ": bad integer \"" + tok + "\"");
        }
    }
    return out;
}

inline CStarAlgebra parse_algebra_spec(const std::string& spec, const std::string& chain) {
    std::vector<Index> dims;
    std::stringstream ss(spec);
    std::string tok;
    while (std::getline(ss, tok, '+')) {
        if (tok.size() < 2 || (tok[0] != 'M' && tok[0] != 'm')) {
            throw Error(ErrorCode::SchemaError, "algebra: expected blocks like M2+M1, got \"" + spec + "\"");
        }
        const auto v = parse_index_csv(tok.substr(1), "algebra");
        if (v.size() != 1 || v[0] < 1) throw Error(ErrorCode::SchemaError, "algebra block \"" + tok + "\"");
        dims.push_back(v[0]);
    }
    std::vector<std::vector<Index>> levels;
    if (!chain.empty()) {
        std::stringstream cs(chain);
        while (std::getline(cs, tok, '|')) levels.push_back(parse_index_csv(tok, "chain"));
    }
    return CStarAlgebra(dims, levels);
}

inline HilbertModule parse_module_spec(const CStarAlgebra& alg, const std::string& spec) {
    const auto colon = spec.find(':');
    const std::string kind = spec.substr(0, colon);
    const std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
    if (kind == "self") return HilbertModule::self(alg);
    if (kind == "free") {
        const auto v = parse_index_csv(arg.empty() ? "1" : arg, "module rank");
        if (v.size() != 1) throw Error(ErrorCode::SchemaError, "free module takes one rank");
        return HilbertModule::free(alg, v[0]);
    }
    if (kind == "rect") return HilbertModule::rect(alg, parse_index_csv(arg, "module rows"));
    throw Error(ErrorCode::SchemaError, "module: expected self, free:m or rect:p1,p2,...");
}

inline FlagSpace flag_from_spec(const std::string& spec, const CStarAlgebra& alg, const std::string& what) {
    const auto dims = parse_index_csv(spec, what);
    if (static_cast<Index>(dims.size()) != alg.levels()) {
        throw Error(ErrorCode::SchemaError, what + " needs " + std::to_string(alg.levels()) + " levels");
    }
    return FlagSpace(dims);
}

}  // namespace detail

inline Instance generate_instance(const GenOptions& o) {
    Instance inst;
    inst.seed = o.seed;
    inst.algebra = detail::parse_algebra_spec(o.algebra, o.chain);
    const CStarAlgebra& alg = inst.algebra;
    inst.module = detail::parse_module_spec(alg, o.module);

    if (o.fixture == "identity" || o.fixture == "two-copy") {
        if (alg.levels() != 1) throw Error(ErrorCode::SchemaError, o.fixture + " fixture needs a one-level chain");
        const HilbertModule self = HilbertModule::self(alg);
        const Index copies = o.fixture == "identity" ? 1 : 2;
        const FlagSpace space = FlagSpace::trivial(copies * alg.rep_dim());
        CPWitness w;
        for (const auto& e : algebra_basis(alg)) w.pi.push_back(kron(identity(copies), e.represent()));
        for (const auto& x : module_basis(self)) w.Pi.push_back(kron(identity(copies), x.represent()));
        w.S.push_back(identity(space.dim()));
        w.W.push_back(identity(space.dim()));
        CPPair p = cp_pair_from_witness(self, space, space, std::move(w));
        inst.module = self;
        inst.H = space;
        inst.K = space;
        inst.n = 1;
        inst.phi = p.phi;
        inst.Phi = p.Phi;
    } else if (o.fixture == "transpose") {
        inst.n = 1;
        inst.phi = transpose_map(alg);
        if (alg.levels() != 1) throw Error(ErrorCode::SchemaError, "transpose fixture needs a one-level chain");
        inst.H = inst.phi.space();
    } else if (o.fixture == "trace") {
        if (alg.levels() != 1) throw Error(ErrorCode::SchemaError, "trace fixture needs a one-level chain");
        inst.n = 1;
        inst.H = FlagSpace::trivial(1);
        inst.phi = NPositiveMatrixMap::from_function(1, alg, inst.H, [](Index, Index, const AlgElement& a) -> CMatrix {
            return CMatrix::Constant(1, 1, a.represent().trace());
        });
    } else if (o.fixture == "random" || o.fixture == "zero") {
        if (o.n < 1) throw Error(ErrorCode::SchemaError, "n must be >= 1");
        inst.n = o.n;
        if (!o.H.empty()) {
            inst.H = detail::flag_from_spec(o.H, alg, "H");
        } else {
            std::vector<Index> dims;
            for (Index l = 0; l < alg.levels(); ++l) dims.push_back(l + 1);
            inst.H = FlagSpace(dims);
        }
        if (!o.K.empty()) {
            inst.K = detail::flag_from_spec(o.K, alg, "K");
        } else {
            std::vector<Index> dims;
            Index total = 0;
            for (Index l = 0; l < alg.levels(); ++l) {
                const Index need = inst.H.increment(l) == 0 ? 0 : o.mult * inst.module.level_rep_rows(l);
                total += std::max<Index>(1, (need + o.n - 1) / o.n);
                dims.push_back(total);
            }
            inst.K = FlagSpace(dims);
        }
        if (o.fixture == "zero") {
            inst.phi = NPositiveMatrixMap::zero(o.n, alg, inst.H);
            const Index cells = inst.K->dim() * inst.H.dim();
            inst.Phi = ModuleCPMatrix(inst.module, inst.H, *inst.K,
                                      std::vector<CMatrix>(o.n * o.n, CMatrix::Zero(cells, inst.module.dim())),
                                      inst.phi);
        } else {
            if (o.mult < 1) throw Error(ErrorCode::BadMultiplicity, "mult must be >= 1");
            CPPair p = random_cp_pair(inst.module, inst.H, *inst.K, o.n, o.mult * alg.rep_dim(), o.seed);
            inst.phi = p.phi;
            inst.Phi = p.Phi;
        }
    } else {
        throw Error(ErrorCode::SchemaError, "unknown fixture \"" + o.fixture + "\"");
    }

    if (o.pair != "none") {
        if (!inst.Phi) throw Error(ErrorCode::SchemaError, "pair needs a fixture with Phi");
        if (o.pair == "rotated") {
            Rng rng(derive_seed(o.seed, 7));
            inst.pair = rotated(*inst.Phi, random_flag_unitary(*inst.K, rng));
        } else if (o.pair == "scaled") {
            inst.pair = scaled(*inst.Phi, o.scale == 0.0 ? 2.0 : o.scale);
        } else if (o.pair == "derivative") {
            const double c = o.scale == 0.0 ? 0.5 : o.scale;
            if (c < 0.0 || c > 1.0) throw Error(ErrorCode::SchemaError, "derivative scale must lie in [0,1]");
            const DilationData dil = build_dilation(inst.phi, *inst.Phi, inst.tol);
            inst.pair = derivative_inverse(dil, c * identity(dil.dim_H()), c * identity(dil.dim_K()), inst.tol);
        } else {
            throw Error(ErrorCode::SchemaError, "unknown pair \"" + o.pair + "\"");
        }
    }
    return inst;
}

}  // namespace cpdilate::io
