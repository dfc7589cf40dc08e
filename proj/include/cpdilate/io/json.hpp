#pragma once

// JSON plumbing for instance and certificate files: canonical emission
// (sorted keys, %.17g floats, no whitespace), complex matrices as
// {"rows","cols","data":[[re,im],...]} in row-major order, and a path-tracking
// reader that collects schema errors instead of stopping at the first one.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "cpdilate/linalg.hpp"

namespace cpdilate::io {

using Json = nlohmann::json;

namespace detail {

inline void emit_string(std::string& out, const std::string& s) {
    // nlohmann's dump of a lone string is already the canonical escaped form.
    out += Json(s).dump();
}

inline void emit_double(std::string& out, double v) {
    if (!std::isfinite(v)) throw Error(ErrorCode::SchemaError, "non-finite number in output");
    if (v == 0.0) v = 0.0;  // drop the sign of -0
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out += buf;
}

inline void emit(std::string& out, const Json& j) {
    switch (j.type()) {
        case Json::value_t::object: {
            out += '{';
            bool first = true;
            for (const auto& [key, val] : j.items()) {  // std::map order: sorted keys
                if (!first) out += ',';
                first = false;
                emit_string(out, key);
                out += ':';
                emit(out, val);
            }
            out += '}';
            break;
        }
        case Json::value_t::array: {
            out += '[';
            for (std::size_t i = 0; i < j.size(); ++i) {
                if (i) out += ',';
                emit(out, j[i]);
            }
            out += ']';
            break;
        }
        case Json::value_t::string: emit_string(out, j.get_ref<const std::string&>()); break;
        case Json::value_t::boolean: out += j.get<bool>() ? "true" : "false"; break;
        case Json::value_t::number_integer: out += std::to_string(j.get<std::int64_t>()); break;
        case Json::value_t::number_unsigned: out += std::to_string(j.get<std::uint64_t>()); break;
        case Json::value_t::number_float: emit_double(out, j.get<double>()); break;
        case Json::value_t::null: out += "null"; break;
        default: throw Error(ErrorCode::SchemaError, "unsupported JSON value");
    }
}

}  // namespace detail

/// Canonical text: byte-identical for equal documents, stable under parse/emit.
inline std::string canonical_dump(const Json& j) {
    std::string out;
    detail::emit(out, j);
    out += '\n';
    return out;
}

inline std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error(ErrorCode::IoError, "sha256 failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 15];
    }
    return out;
}

// JSON built in memory stores small integers as signed; parsed text as unsigned.
inline bool is_seed(const Json& j) {
    return j.is_number_unsigned() || (j.is_number_integer() && j.get<std::int64_t>() >= 0);
}

inline Json matrix_to_json(const CMatrix& m) {
    Json data = Json::array();
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j) data.push_back(Json::array({m(i, j).real(), m(i, j).imag()}));
    return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

inline Json matrices_to_json(const std::vector<CMatrix>& ms) {
    Json arr = Json::array();
    for (const auto& m : ms) arr.push_back(matrix_to_json(m));
    return arr;
}

inline Json vector_to_json(const CVector& v) {
    Json data = Json::array();
    for (Index i = 0; i < v.size(); ++i) data.push_back(Json::array({v(i).real(), v(i).imag()}));
    return data;
}

/// Reads a JSON tree while tracking the current path; type and shape
/// problems are appended to `errors` as "<path>: <reason>".
class Reader {
public:
    explicit Reader(std::vector<std::string>& errors) : errors_(errors) {}

    void fail(const std::string& path, const std::string& why) { errors_.push_back(path + ": " + why); }
    bool ok() const { return errors_.empty(); }

    const Json* field(const Json& obj, const std::string& path, const std::string& key, bool required = true) {
        if (!obj.is_object()) {
            fail(path, "expected an object");
            return nullptr;
        }
        auto it = obj.find(key);
        if (it == obj.end()) {
            if (required) fail(path + "/" + key, "missing");
            return nullptr;
        }
        return &*it;
    }

    bool integer(const Json* j, const std::string& path, Index& out, Index min_value = 0) {
        if (!j) return false;
        if (!j->is_number_integer()) {
            fail(path, "expected an integer");
            return false;
        }
        const auto v = j->get<std::int64_t>();
        if (v < min_value) {
            fail(path, "must be >= " + std::to_string(min_value));
            return false;
        }
        out = static_cast<Index>(v);
        return true;
    }

    bool number(const Json* j, const std::string& path, double& out) {
        if (!j) return false;
        if (!j->is_number()) {
            fail(path, "expected a number");
            return false;
        }
        out = j->get<double>();
        if (!std::isfinite(out)) {
            fail(path, "must be finite");
            return false;
        }
        return true;
    }

    bool string(const Json* j, const std::string& path, std::string& out) {
        if (!j) return false;
        if (!j->is_string()) {
            fail(path, "expected a string");
            return false;
        }
        out = j->get<std::string>();
        return true;
    }

    bool index_list(const Json* j, const std::string& path, std::vector<Index>& out, Index min_value = 0) {
        if (!j) return false;
        if (!j->is_array()) {
            fail(path, "expected an array of integers");
            return false;
        }
        out.clear();
        bool good = true;
        for (std::size_t i = 0; i < j->size(); ++i) {
            Index v = 0;
            if (integer(&(*j)[i], path + "/" + std::to_string(i), v, min_value)) out.push_back(v);
            else good = false;
        }
        return good;
    }

    bool complex_value(const Json& j, const std::string& path, Complex& out) {
        if (!j.is_array() || j.size() != 2) {
            fail(path, "complex entry must be a [re, im] pair");
            return false;
        }
        double re = 0.0, im = 0.0;
        if (!number(&j[0], path + "/0", re) || !number(&j[1], path + "/1", im)) return false;
        out = Complex(re, im);
        return true;
    }

    /// Matrix with optional expected shape (negative = unconstrained).
    bool matrix(const Json* j, const std::string& path, CMatrix& out, Index rows = -1, Index cols = -1) {
        if (!j) return false;
        Index r = 0, c = 0;
        const bool shape = integer(field(*j, path, "rows"), path + "/rows", r) &
                           integer(field(*j, path, "cols"), path + "/cols", c);
        const Json* data = field(*j, path, "data");
        if (!shape || !data) return false;
        if ((rows >= 0 && r != rows) || (cols >= 0 && c != cols)) {
            fail(path, "shape " + std::to_string(r) + "x" + std::to_string(c) + ", expected " +
                           std::to_string(rows) + "x" + std::to_string(cols));
            return false;
        }
        if (!data->is_array() || static_cast<Index>(data->size()) != r * c) {
            fail(path + "/data", "expected " + std::to_string(r * c) + " complex entries");
            return false;
        }
        out.resize(r, c);
        bool good = true;
        for (Index i = 0; i < r; ++i)
            for (Index k = 0; k < c; ++k)
                good &= complex_value((*data)[i * c + k], path + "/data/" + std::to_string(i * c + k), out(i, k));
        return good;
    }

    bool matrix_list(const Json* j, const std::string& path, std::vector<CMatrix>& out, Index count = -1,
                     Index rows = -1, Index cols = -1) {
        if (!j) return false;
        if (!j->is_array() || (count >= 0 && static_cast<Index>(j->size()) != count)) {
            fail(path, count >= 0 ? "expected an array of " + std::to_string(count) + " matrices"
                                  : "expected an array of matrices");
            return false;
        }
        out.assign(j->size(), CMatrix());
        bool good = true;
        for (std::size_t i = 0; i < j->size(); ++i)
            good &= matrix(&(*j)[i], path + "/" + std::to_string(i), out[i], rows, cols);
        return good;
    }

    bool complex_vector(const Json* j, const std::string& path, CVector& out, Index size = -1) {
        if (!j) return false;
        if (!j->is_array() || (size >= 0 && static_cast<Index>(j->size()) != size)) {
            fail(path, "expected an array of " + std::to_string(size) + " complex entries");
            return false;
        }
        out.resize(static_cast<Index>(j->size()));
        bool good = true;
        for (std::size_t i = 0; i < j->size(); ++i)
            good &= complex_value((*j)[i], path + "/" + std::to_string(i), out(static_cast<Index>(i)));
        return good;
    }

private:
    std::vector<std::string>& errors_;
};

inline std::string join_errors(const std::vector<std::string>& errors) {
    std::string out;
    for (const auto& e : errors) {
        if (!out.empty()) out += "; ";
        out += e;
    }
    return out;
}

}  // namespace cpdilate::io
