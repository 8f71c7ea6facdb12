#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include <openssl/evp.h>

#include "flowbone/align.hpp"
#include "flowbone/backbone.hpp"
#include "flowbone/cluster.hpp"
#include "flowbone/csv.hpp"
#include "flowbone/embed.hpp"
#include "flowbone/error.hpp"
#include "flowbone/signed_metrics.hpp"
#include "flowbone/temporal.hpp"

namespace flowbone::io {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

/// Writes via a sibling temporary file and rename so readers never see partial files.
inline void write_atomic(const fs::path& path, const std::string& content) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out << content;
        if (!out.flush()) throw IoError("write failed for " + tmp.string());
    }
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::string sha256_hex(const std::string& data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw IoError("sha256 failed");
    std::string hex;
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", digest[i]);
        hex += buf;
    }
    return hex;
}

namespace detail {

inline std::size_t node_index(const std::vector<std::string>& nodes, const std::string& id, const csv::Reader& r) {
    auto it = std::lower_bound(nodes.begin(), nodes.end(), id);
    if (it == nodes.end() || *it != id) r.fail("unknown node id '" + id + "'");
    return static_cast<std::size_t>(it - nodes.begin());
}

}  // namespace detail

// --- backbone -------------------------------------------------------------

inline std::string backbone_csv(const SignedBackbone& bb) {
    std::ostringstream out;
    out << "year,src,dst,weight,expected,vigor,p_value,sign\n";
    for (const auto& e : bb.edges)
        out << bb.year << ',' << csv::quote(bb.nodes[e.src]) << ',' << csv::quote(bb.nodes[e.dst]) << ',' << e.weight
            << ',' << csv::real(e.expected) << ',' << csv::real(e.vigor) << ',' << csv::real(e.p_value) << ','
            << e.sign << '\n';
    return out.str();
}

inline SignedBackbone read_backbone(const fs::path& path, int year, const std::vector<std::string>& nodes) {
    csv::Reader r(path.string());
    r.expect_header("year,src,dst,weight,expected,vigor,p_value,sign");
    SignedBackbone bb;
    bb.year = year;
    bb.nodes = nodes;
    std::vector<std::string> f;
    while (r.next(f)) {
        if (f.size() != 8) r.fail("expected 8 fields");
        auto y = csv::parse_int(f[0]);
        auto w = csv::parse_count(f[3]);
        auto ex = csv::parse_real(f[4]);
        auto vg = csv::parse_real(f[5]);
        auto pv = csv::parse_real(f[6]);
        auto sg = csv::parse_int(f[7]);
        if (!y || !w || !ex || !vg || !pv || !sg) r.fail("malformed backbone row");
        if (*y != year) r.fail("row year " + f[0] + " does not match " + std::to_string(year));
        if (*sg != 1 && *sg != -1) r.fail("sign must be 1 or -1");
        bb.edges.push_back({detail::node_index(nodes, f[1], r), detail::node_index(nodes, f[2], r), *w, *ex, *vg, *pv,
                            static_cast<int>(*sg)});
    }
    return bb;
}

// --- embeddings ---------------------------------------------------------------

inline std::string embedding_csv(const EmbeddingMatrix& emb) {
    std::ostringstream out;
    out << "node";
    for (Eigen::Index k = 0; k < emb.dim(); ++k) out << ",z" << (k + 1);
    out << '\n';
    for (Eigen::Index i = 0; i < emb.z.rows(); ++i) {
        out << csv::quote(emb.nodes[static_cast<std::size_t>(i)]);
        for (Eigen::Index k = 0; k < emb.dim(); ++k) out << ',' << csv::real(emb.z(i, k));
        out << '\n';
    }
    return out.str();
}

inline EmbeddingMatrix read_embedding(const fs::path& path, int year) {
    csv::Reader r(path.string());
    std::vector<std::string> header;
    if (!r.next(header) || header.empty() || header[0] != "node") r.fail("expected header node,z1,...,zd");
    const auto d = static_cast<Eigen::Index>(header.size() - 1);
    for (Eigen::Index k = 0; k < d; ++k)
        if (header[static_cast<std::size_t>(k + 1)] != "z" + std::to_string(k + 1)) r.fail("bad embedding header");
    std::vector<std::string> nodes;
    std::vector<double> vals;
    std::vector<std::string> f;
    while (r.next(f)) {
        if (static_cast<Eigen::Index>(f.size()) != d + 1) r.fail("wrong number of columns");
        nodes.push_back(f[0]);
        for (std::size_t k = 1; k < f.size(); ++k) {
            auto v = csv::parse_real(f[k]);
            if (!v) r.fail("non-numeric coordinate");
            vals.push_back(*v);
        }
    }
    EmbeddingMatrix emb;
    emb.year = year;
    emb.nodes = std::move(nodes);
    emb.z = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        vals.data(), static_cast<Eigen::Index>(emb.nodes.size()), d);
    return emb;
}

// --- metrics ----------------------------------------------------------------

inline json reciprocity_json(const SignedBackbone& bb) {
    if (bb.edges.empty()) return nullptr;
    const auto r = signed_reciprocity(bb);
    return {{"pos_pos_ratio", r.pos_pos_ratio},
            {"neg_neg_ratio", r.neg_neg_ratio},
            {"same_sign_ratio", r.same_sign_ratio},
            {"conflicting_ratio", r.conflicting_ratio},
            {"edge_count", r.edge_count}};
}

inline json balance_json(const BalanceReport& b) {
    json out = {{"triangle_count", b.triangle_count}};
    out["sb"] = b.sb ? json(*b.sb) : json(nullptr);
    out["wsb"] = b.wsb ? json(*b.wsb) : json(nullptr);
    out["census"] = {{"+++", b.census[0]}, {"++-", b.census[1]}, {"+--", b.census[2]}, {"---", b.census[3]}};
    return out;
}

inline std::string metrics_json(const SignedBackbone& bb, double density) {
    json out;
    out["year"] = bb.year;
    out["reciprocity"] = reciprocity_json(bb);
    out["balance"] = balance_json(balance_scores(to_undirected(bb)));
    out["density"] = density;
    out["backbone_size"] = bb.edges.size();
    return out.dump(2) + "\n";
}

// --- clustering ---------------------------------------------------------------

inline std::string cluster_rows(int year, const ClusterAssignment& a, const std::vector<std::string>& nodes) {
    std::ostringstream out;
    for (std::size_t i = 0; i < nodes.size(); ++i)
        out << year << ',' << a.method << ',' << csv::quote(nodes[i]) << ',' << a.labels[i] << '\n';
    return out.str();
}

inline std::string merge_tree_json(const MergeTree& t) {
    json arr = json::array();
    for (const auto& m : t.merges) arr.push_back({{"a", m.a}, {"b", m.b}, {"height", m.height}, {"id", m.id}});
    return arr.dump(2) + "\n";
}

inline MergeTree read_merge_tree(const fs::path& path, std::size_t leaves) {
    MergeTree t;
    t.leaves = leaves;
    try {
        for (const auto& m : json::parse(read_file(path)))
            t.merges.push_back({m.at("a").get<int>(), m.at("b").get<int>(), m.at("height").get<double>(),
                                m.at("id").get<int>()});
    } catch (const json::exception& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
    return t;
}

// --- temporal -----------------------------------------------------------------

inline std::string persistence_csv(const PersistenceTable& t) {
    std::ostringstream out;
    out << "src,dst,total_count,sign_flips";
    for (int y : t.years) out << ",y" << y;
    out << '\n';
    for (const auto& [pair, rec] : t.links) {
        out << csv::quote(t.nodes[pair.first]) << ',' << csv::quote(t.nodes[pair.second]) << ',' << rec.total_count
            << ',' << rec.sign_flips;
        for (bool p : rec.present) out << ',' << (p ? 1 : 0);
        out << '\n';
    }
    return out.str();
}

}  // namespace flowbone::io
