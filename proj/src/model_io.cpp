#include <fstream>
#include <sstream>

#include "jumpstab/error.hpp"
#include "jumpstab/json_matrix.hpp"
#include "jumpstab/model.hpp"

namespace jumpstab {

namespace json_io {

json matrix_to_json(const Matrix& X) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < X.cols(); ++j) row.push_back(X(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix matrix_from_json(const json& j, const std::string& field) {
    if (!j.is_array()) throw ParseError(field + ": expected a matrix (array of rows)");
    const auto rows = static_cast<Eigen::Index>(j.size());
    if (rows == 0) return Matrix(0, 0);
    if (!j[0].is_array()) throw ParseError(field + ": expected a matrix (array of rows)");
    const auto cols = static_cast<Eigen::Index>(j[0].size());
    Matrix X(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto& row = j[static_cast<std::size_t>(i)];
        if (!row.is_array())
            throw ParseError(field + ": row " + std::to_string(i) + " is not an array");
        if (static_cast<Eigen::Index>(row.size()) != cols)
            throw DimensionError(field, "ragged matrix, row " + std::to_string(i) + " has " +
                                            std::to_string(row.size()) + " entries, expected " +
                                            std::to_string(cols));
        for (Eigen::Index c = 0; c < cols; ++c) {
            const auto& v = row[static_cast<std::size_t>(c)];
            if (!v.is_number())
                throw ParseError(field + ": entry (" + std::to_string(i) + "," + std::to_string(c) +
                                 ") is not a number");
            X(i, c) = v.get<double>();
        }
    }
    return X;
}

int array_depth(const json& j) {
    int depth = 0;
    const json* p = &j;
    while (p->is_array()) {
        ++depth;
        if (p->empty()) break;
        p = &(*p)[0];
    }
    return depth;
}

json table_to_json(const std::vector<std::vector<Matrix>>& table) {
    const bool single = !table.empty() && table.front().size() == 1;
    json out = json::array();
    for (const auto& per_regime : table) {
        if (single) {
            out.push_back(matrix_to_json(per_regime.front()));
        } else {
            json ks = json::array();
            for (const auto& X : per_regime) ks.push_back(matrix_to_json(X));
            out.push_back(std::move(ks));
        }
    }
    return out;
}

std::vector<std::vector<Matrix>> table_from_json(const json& j, const std::string& field) {
    if (!j.is_array()) throw ParseError(field + ": expected an array");
    const int depth = array_depth(j);
    std::vector<std::vector<Matrix>> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string loc = field + "[" + std::to_string(i) + "]";
        if (depth >= 4) {
            std::vector<Matrix> ks;
            for (std::size_t k = 0; k < j[i].size(); ++k)
                ks.push_back(matrix_from_json(j[i][k], loc + "[" + std::to_string(k) + "]"));
            out.push_back(std::move(ks));
        } else {
            out.push_back({matrix_from_json(j[i], loc)});
        }
    }
    return out;
}

double number_from_json(const json& j, const std::string& field) {
    if (!j.is_number()) throw ParseError(field + ": expected a number");
    return j.get<double>();
}

std::string describe_position(const std::string& text, std::size_t byte) {
    std::size_t line = 1;
    std::size_t col = 1;
    for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace json_io

namespace {

using json_io::json;
using json_io::matrix_from_json;
using json_io::matrix_to_json;

const json& require(const json& j, const char* key, const std::string& where) {
    auto it = j.find(key);
    if (it == j.end()) throw ParseError(where + ": missing required field '" + key + "'");
    return *it;
}

int int_from_json(const json& j, const std::string& field) {
    if (!j.is_number_integer()) throw ParseError(field + ": expected an integer");
    return j.get<int>();
}

void expect_shape(const Matrix& X, Eigen::Index rows, Eigen::Index cols, const std::string& field) {
    if (X.rows() != rows || X.cols() != cols)
        throw DimensionError(field, "expected " + std::to_string(rows) + "x" + std::to_string(cols) +
                                        ", got " + std::to_string(X.rows()) + "x" +
                                        std::to_string(X.cols()));
}

std::string idx(const std::string& name, std::size_t i) { return name + "[" + std::to_string(i) + "]"; }

}  // namespace

Model parse_model(std::string_view text_view) {
    const std::string text(text_view);
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError("model JSON parse error at " + json_io::describe_position(text, e.byte) +
                         ": " + e.what());
    }
    if (!doc.is_object()) throw ParseError("model: top level must be an object");

    Model model;
    auto& sys = model.system;
    sys.m = int_from_json(require(doc, "m", "model"), "m");
    sys.r = int_from_json(require(doc, "r", "model"), "r");
    const int N = int_from_json(require(doc, "N", "model"), "N");
    if (sys.m <= 0 || sys.r <= 0 || N <= 0) throw ParseError("model: m, r, N must be positive");
    const int m = sys.m;
    const int r = sys.r;

    const auto& regimes = require(doc, "regimes", "model");
    if (!regimes.is_array() || static_cast<int>(regimes.size()) != N)
        throw DimensionError("regimes", "expected " + std::to_string(N) + " regime entries");
    for (std::size_t i = 0; i < regimes.size(); ++i) {
        const auto& rj = regimes[i];
        const std::string where = idx("regimes", i);
        Regime reg;
        reg.A = matrix_from_json(require(rj, "A", where), idx("A", i));
        expect_shape(reg.A, m, m, idx("A", i));
        reg.B = matrix_from_json(require(rj, "B", where), idx("B", i));
        expect_shape(reg.B, m, r, idx("B", i));
        if (auto it = rj.find("Sigma"); it != rj.end()) {
            if (!it->is_array()) throw ParseError(idx("Sigma", i) + ": expected a list of matrices");
            for (std::size_t l = 0; l < it->size(); ++l) {
                const auto field = idx(idx("Sigma", i), l);
                reg.sigma.push_back(matrix_from_json((*it)[l], field));
                expect_shape(reg.sigma.back(), m, m, field);
            }
        }
        if (auto it = rj.find("PoissonJump"); it != rj.end()) {
            if (!it->is_array()) throw ParseError(idx("PoissonJump", i) + ": expected a list");
            for (std::size_t l = 0; l < it->size(); ++l) {
                const auto field = idx(idx("PoissonJump", i), l);
                PoissonMark mk;
                mk.weight = json_io::number_from_json(require((*it)[l], "weight", field), field + ".weight");
                mk.C = matrix_from_json(require((*it)[l], "C", field), field + ".C");
                expect_shape(mk.C, m, m, field + ".C");
                reg.marks.push_back(std::move(mk));
            }
        }
        sys.regimes.push_back(std::move(reg));
    }

    if (auto it = doc.find("Q"); it != doc.end()) {
        sys.Q = matrix_from_json(*it, "Q");
        expect_shape(sys.Q, N, N, "Q");
    } else {
        sys.Q = Matrix::Zero(N, N);
    }

    sys.regime_jump.K.assign(N, std::vector<Matrix>(N, Matrix::Identity(m, m)));
    if (auto it = doc.find("regime_jump"); it != doc.end()) {
        const auto& rj = *it;
        if (auto k = rj.find("K"); k != rj.end()) {
            if (!k->is_array() || static_cast<int>(k->size()) != N)
                throw DimensionError("regime_jump.K", "expected " + std::to_string(N) + " rows");
            for (int i = 0; i < N; ++i) {
                const auto& row = (*k)[i];
                if (!row.is_array() || static_cast<int>(row.size()) != N)
                    throw DimensionError(idx("regime_jump.K", i),
                                         "expected " + std::to_string(N) + " matrices");
                for (int j = 0; j < N; ++j) {
                    const auto field = idx(idx("regime_jump.K", i), j);
                    sys.regime_jump.K[i][j] = matrix_from_json(row[j], field);
                    expect_shape(sys.regime_jump.K[i][j], m, m, field);
                }
            }
        }
        if (auto q = rj.find("Qs"); q != rj.end()) {
            for (std::size_t s = 0; s < q->size(); ++s) {
                const auto field = idx("regime_jump.Qs", s);
                sys.regime_jump.Qs.push_back(matrix_from_json((*q)[s], field));
                expect_shape(sys.regime_jump.Qs.back(), m, m, field);
            }
        }
        if (auto law = rj.find("xi_law"); law != rj.end()) {
            if (!law->is_string()) throw ParseError("regime_jump.xi_law: expected a string");
            sys.regime_jump.xi_law = parse_xi_law(law->get<std::string>());
        }
    }

    auto& ds = sys.det_switch;
    ds.P_H = Matrix::Identity(1, 1);
    ds.J = {Matrix::Identity(m, m)};
    if (auto it = doc.find("det_switch"); it != doc.end()) {
        const auto& dj = *it;
        if (auto t = dj.find("times"); t != dj.end()) {
            if (!t->is_array()) throw ParseError("det_switch.times: expected an array");
            for (std::size_t k = 0; k < t->size(); ++k)
                ds.times.push_back(json_io::number_from_json((*t)[k], idx("det_switch.times", k)));
        }
        if (auto p = dj.find("P_H"); p != dj.end()) {
            ds.P_H = matrix_from_json(*p, "det_switch.P_H");
            if (ds.P_H.rows() != ds.P_H.cols())
                throw DimensionError("det_switch.P_H", "must be square");
            ds.J.assign(ds.P_H.rows(), Matrix::Identity(m, m));
        }
        if (auto h = dj.find("h0"); h != dj.end()) ds.h0 = int_from_json(*h, "det_switch.h0");
        if (auto jj = dj.find("J"); jj != dj.end()) {
            if (!jj->is_array()) throw ParseError("det_switch.J: expected a list of matrices");
            ds.J.clear();
            for (std::size_t h = 0; h < jj->size(); ++h) {
                const auto field = idx("det_switch.J", h);
                ds.J.push_back(matrix_from_json((*jj)[h], field));
                expect_shape(ds.J.back(), m, m, field);
            }
        }
    }

    const auto& wj = require(doc, "weights", "model");
    model.weights.M = json_io::table_from_json(require(wj, "M", "weights"), "weights.M");
    model.weights.D = json_io::table_from_json(require(wj, "D", "weights"), "weights.D");
    if (static_cast<int>(model.weights.M.size()) != N)
        throw DimensionError("weights.M", "expected " + std::to_string(N) + " entries");
    if (static_cast<int>(model.weights.D.size()) != N)
        throw DimensionError("weights.D", "expected " + std::to_string(N) + " entries");
    for (int i = 0; i < N; ++i) {
        for (std::size_t k = 0; k < model.weights.M[i].size(); ++k)
            expect_shape(model.weights.M[i][k], m, m, idx("weights.M", i));
        for (std::size_t k = 0; k < model.weights.D[i].size(); ++k)
            expect_shape(model.weights.D[i][k], r, r, idx("weights.D", i));
    }
    return model;
}

Model load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open model file '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_model(ss.str());
}

std::string serialize_model(const RegimeSystem& sys, const CostWeights& w) {
    json doc;
    doc["m"] = sys.m;
    doc["r"] = sys.r;
    doc["N"] = sys.regime_count();
    json regimes = json::array();
    for (const auto& reg : sys.regimes) {
        json rj;
        rj["A"] = matrix_to_json(reg.A);
        rj["B"] = matrix_to_json(reg.B);
        rj["Sigma"] = json::array();
        for (const auto& S : reg.sigma) rj["Sigma"].push_back(matrix_to_json(S));
        rj["PoissonJump"] = json::array();
        for (const auto& mk : reg.marks)
            rj["PoissonJump"].push_back({{"weight", mk.weight}, {"C", matrix_to_json(mk.C)}});
        regimes.push_back(std::move(rj));
    }
    doc["regimes"] = std::move(regimes);
    doc["Q"] = matrix_to_json(sys.Q);

    json K = json::array();
    for (const auto& row : sys.regime_jump.K) {
        json jr = json::array();
        for (const auto& X : row) jr.push_back(matrix_to_json(X));
        K.push_back(std::move(jr));
    }
    json Qs = json::array();
    for (const auto& X : sys.regime_jump.Qs) Qs.push_back(matrix_to_json(X));
    doc["regime_jump"] = {{"K", std::move(K)},
                          {"Qs", std::move(Qs)},
                          {"xi_law", std::string(to_string(sys.regime_jump.xi_law))}};

    json J = json::array();
    for (const auto& X : sys.det_switch.J) J.push_back(matrix_to_json(X));
    doc["det_switch"] = {{"times", sys.det_switch.times},
                         {"P_H", matrix_to_json(sys.det_switch.P_H)},
                         {"h0", sys.det_switch.h0},
                         {"J", std::move(J)}};

    doc["weights"] = {{"M", json_io::table_to_json(w.M)}, {"D", json_io::table_to_json(w.D)}};
    return doc.dump(2) + "\n";
}

void save_model(const std::filesystem::path& path, const RegimeSystem& sys, const CostWeights& w) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write model file '" + path.string() + "'");
    out << serialize_model(sys, w);
}

}  // namespace jumpstab
