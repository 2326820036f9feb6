#pragma once

#include <gencrit/densela.hpp>
#include <gencrit/geometry.hpp>
#include <gencrit/stationarity.hpp>
#include <gencrit/types.hpp>

#include <cmath>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

namespace gencrit {

inline constexpr std::string_view kToolVersion = "0.1.0";
inline constexpr std::string_view kReportSchema = "gencrit-report/1";

/// Reals are rendered with 17 significant digits so reports round-trip
/// doubles exactly and identical runs produce identical bytes.
inline std::string json_real(double v) {
    if (std::isnan(v)) return "\"NaN\"";
    if (std::isinf(v)) return v > 0 ? "\"Infinity\"" : "\"-Infinity\"";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string json_escape(std::string_view s) {
    std::string out;
    out.reserve(s.size() + 2);
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof buf, "\\u%04x", c);
                    out += buf;
                } else {
                    out += c;
                }
        }
    }
    return out;
}

/// Minimal JSON emitter with deterministic key order (insertion order) and
/// the real-number formatting above.
class JsonBuilder {
public:
    JsonBuilder& begin_object() {
        separate();
        out_ += '{';
        stack_.push_back(true);
        return *this;
    }
    JsonBuilder& end_object() {
        out_ += '}';
        stack_.pop_back();
        mark_value();
        return *this;
    }
    JsonBuilder& begin_array() {
        separate();
        out_ += '[';
        stack_.push_back(true);
        return *this;
    }
    JsonBuilder& end_array() {
        out_ += ']';
        stack_.pop_back();
        mark_value();
        return *this;
    }
    JsonBuilder& key(std::string_view name) {
        separate();
        out_ += '"';
        out_ += json_escape(name);
        out_ += "\":";
        pending_key_ = true;
        return *this;
    }
    JsonBuilder& value(double v) { return raw(json_real(v)); }
    JsonBuilder& value(int v) { return raw(std::to_string(v)); }
    JsonBuilder& value(Index v) { return raw(std::to_string(v)); }
    JsonBuilder& value(std::uint64_t v) { return raw(std::to_string(v)); }
    JsonBuilder& value(bool v) { return raw(v ? "true" : "false"); }
    JsonBuilder& value(std::string_view v) { return raw('"' + json_escape(v) + '"'); }
    JsonBuilder& value(const char* v) { return value(std::string_view(v)); }

    JsonBuilder& value(const Vec& v) {
        begin_array();
        for (Index i = 0; i < v.size(); ++i) value(v(i));
        return end_array();
    }

    /// Matrices are emitted as arrays of rows.
    JsonBuilder& value(const Mat& m) {
        begin_array();
        for (Index i = 0; i < m.rows(); ++i) {
            begin_array();
            for (Index j = 0; j < m.cols(); ++j) value(m(i, j));
            end_array();
        }
        return end_array();
    }

    const std::string& str() const { return out_; }

private:
    JsonBuilder& raw(const std::string& text) {
        separate();
        out_ += text;
        mark_value();
        return *this;
    }
    void separate() {
        if (pending_key_) {
            pending_key_ = false;
            return;
        }
        if (!stack_.empty() && !stack_.back()) out_ += ',';
    }
    void mark_value() {
        if (!stack_.empty()) stack_.back() = false;
    }

    std::string out_;
    std::vector<bool> stack_;  // true while the current container is empty
    bool pending_key_ = false;
};

inline void write_check(JsonBuilder& jb, const StationarityCheck& sc) {
    jb.begin_object();
    jb.key("point").value(sc.point);
    jb.key("constraint_residual").value(sc.constraint_residual);
    jb.key("tangent_residual").value(sc.tangent_residual);
    jb.key("is_critical").value(sc.is_critical);
    jb.end_object();
}

inline void write_certificate(JsonBuilder& jb, const MultiplierCertificate& cert) {
    jb.begin_object();
    jb.key("kind").value(cert.kind == CertificateKind::UniqueRegular ? "unique_regular"
                                                                     : "ill_posed");
    jb.key("L").value(cert.L);
    if (cert.L1) jb.key("L1").value(*cert.L1);
    if (cert.witness) jb.key("witness").value(*cert.witness);
    if (cert.gap) jb.key("gap").value(*cert.gap);
    jb.end_object();
}

inline void write_classification(JsonBuilder& jb, const RegularityReport& rep) {
    jb.begin_object();
    jb.key("point").value(rep.point);
    jb.key("on_constraint").value(rep.on_constraint);
    jb.key("rank").value(rep.rank);
    jb.key("regular").value(rep.regular);
    jb.key("generalized_regular").begin_object();
    switch (rep.verdict) {
        case GenRegVerdict::Confirmed:
            jb.key("verdict").value("confirmed");
            jb.key("samples").value(rep.samples);
            break;
        case GenRegVerdict::Refuted:
            jb.key("verdict").value("refuted");
            jb.key("witness").value(*rep.refuted_witness);
            break;
        case GenRegVerdict::Unknown: jb.key("verdict").value("unknown"); break;
    }
    jb.end_object();
    jb.key("tangent_dim").value(rep.tangent_basis.count());
    jb.key("tangent_basis").value(Mat(rep.tangent_basis.columns.transpose()));
    jb.end_object();
}

}  // namespace gencrit
