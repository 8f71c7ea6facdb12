#include "catch_amalgamated.hpp"

#include <cstdlib>
#include <set>

#include "flowbone/pipeline.hpp"
#include "support.hpp"

using namespace flowbone;
using flowbone::test::TempDir;
using Catch::Matchers::ContainsSubstring;
namespace fs = std::filesystem;

namespace {

PipelineConfig small_config(const TempDir& dir, int nodes = 10, int years = 3) {
    SynthConfig sc;
    sc.nodes = nodes;
    sc.years = years;
    sc.regions = 3;
    sc.hubs = 1;
    sc.seed = 5;
    write_synthetic(synthesize(sc), dir.path() / "in");
    PipelineConfig c;
    c.flows = (dir.path() / "in" / "flows.csv").string();
    c.meta = (dir.path() / "in" / "meta.csv").string();
    c.population = (dir.path() / "in" / "population.csv").string();
    c.out = (dir.path() / "out").string();
    c.epochs = 20;
    c.clusters_k = 3;
    c.ego = {"C01"};
    return c;
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) files[fs::relative(e.path(), root).generic_string()] = io::read_file(e.path());
    return files;
}

std::size_t count_kind(const io::json& manifest, const std::string& kind) {
    std::size_t n = 0;
    for (const auto& a : manifest["artifacts"]) n += a["kind"] == kind;
    return n;
}

}  // namespace

TEST_CASE("pipeline counting contract", "[pipeline]") {
    TempDir dir("pipe-count");
    const auto c = small_config(dir);
    const auto r = run_pipeline(c);
    const auto& m = r.manifest;
    CHECK(count_kind(m, "backbone") == 3);
    CHECK(count_kind(m, "embedding") == 3);
    CHECK(count_kind(m, "clusters") == 3);
    CHECK(count_kind(m, "metrics") == 3);

    const auto stability = io::read_file(fs::path(c.out) / "align" / "stability.csv");
    std::size_t lag1 = 0, rows = 0;
    std::istringstream in(stability);
    std::string line;
    std::getline(in, line);
    CHECK(line == "year,lag,stability_error");
    while (std::getline(in, line)) {
        ++rows;
        lag1 += line.find(",1,") != std::string::npos;
    }
    CHECK(lag1 == 2);
    CHECK(rows == 3);  // lags 1,1,2

    const auto clusters = io::read_file(fs::path(c.out) / "cluster" / "clusters_2008.csv");
    CHECK(clusters.starts_with("year,method,node,cluster\n"));
    CHECK(std::count(clusters.begin(), clusters.end(), '\n') == 1 + 2 * 10);
    CHECK(fs::exists(fs::path(c.out) / "render" / "ego_C01_2008.svg"));
    CHECK_FALSE(fs::exists(dir.path() / "out.partial"));
}

TEST_CASE("pipeline is byte-identical across runs", "[pipeline][determinism]") {
    TempDir a("pipe-a"), b("pipe-b");
    auto ca = small_config(a), cb = small_config(b);
    cb.flows = ca.flows;
    cb.meta = ca.meta;
    cb.population = ca.population;
    cb.threads = 3;  // scheduling must not matter
    ca.threads = 1;
    run_pipeline(ca);
    run_pipeline(cb);
    CHECK(snapshot(ca.out) == snapshot(cb.out));
}

TEST_CASE("manifest lists exactly the files on disk", "[pipeline][manifest]") {
    TempDir dir("pipe-manifest");
    const auto c = small_config(dir);
    const auto m = run_pipeline(c).manifest;
    std::set<std::string> listed;
    for (const auto& a : m["artifacts"]) {
        listed.insert(a["path"].get<std::string>());
        CHECK(a["sha256"] == io::sha256_hex(io::read_file(fs::path(c.out) / a["path"].get<std::string>())));
    }
    std::set<std::string> on_disk;
    for (const auto& [path, _] : snapshot(c.out))
        if (path != "manifest.json") on_disk.insert(path);
    CHECK(listed == on_disk);
    CHECK(m["config_hash"] == config_hash(c));
    CHECK(m["config"]["keep_fraction"] == "0.075");
}

TEST_CASE("unwritable output aborts before computing", "[pipeline][errors]") {
    TempDir dir("pipe-unwritable");
    auto c = small_config(dir);
    const auto blocker = dir.write("blocker", "not a directory");
    c.out = blocker + "/out";
    c.flows = dir.write("broken.csv", "garbage");  // would fail validation if it were ever read
    CHECK_THROWS_AS(run_pipeline(c), IoError);
}

TEST_CASE("a failing stage leaves no partial output", "[pipeline][errors]") {
    TempDir dir("pipe-fail");
    auto c = small_config(dir);
    c.ego = {"NOPE"};
    CHECK_THROWS_WITH(run_pipeline(c), ContainsSubstring("stage 'render'") && ContainsSubstring("NOPE"));
    CHECK_FALSE(fs::exists(dir.path() / "out.partial"));
    CHECK_FALSE(fs::exists(fs::path(c.out) / "backbone"));

    auto bad = small_config(dir);
    bad.flows = dir.write("bad.csv", "year,origin,destination,count\n2008,C01,C02,x\n");
    CHECK_THROWS_AS(run_pipeline(bad), ValidationError);
}

TEST_CASE("stages rerun from on-disk artifacts", "[pipeline][stages]") {
    TempDir dir("pipe-stage");
    const auto c = small_config(dir);
    run_pipeline(c);
    const auto before = snapshot(c.out);
    const auto set = load_inputs(c);
    stage_metrics(c, set);
    stage_align(c, set);
    stage_cluster(c, set);
    stage_persistence(c, set);
    write_manifest(c);
    CHECK(snapshot(c.out) == before);
}

TEST_CASE("configuration handling", "[pipeline][config]") {
    TempDir dir("pipe-config");
    PipelineConfig c;
    const auto file = dir.write("run.cfg", "# comment\nkeep_fraction = 0.1\nperiod_a=2008-2010\nperiod_b = 2011-2013 # trailing\n");
    load_config_file(file, c);
    CHECK(c.keep_fraction == 0.1);
    REQUIRE(c.period_a.has_value());
    CHECK(c.period_a->first == 2008);
    CHECK(c.period_b->last == 2013);

    CHECK_THROWS_AS(set_config_value(c, "nonsense", "1"), ValidationError);
    CHECK_THROWS_AS(set_config_value(c, "dim", "eight"), ValidationError);
    CHECK_THROWS_AS(load_config_file(dir.write("bad.cfg", "dim 8\n"), c), ValidationError);

    PipelineConfig d;
    d.flows = "f";
    d.meta = "m";
    d.out = "o";
    validate_config(d);
    d.period_a = YearRange{2008, 2009};
    CHECK_THROWS_AS(validate_config(d), ValidationError);

    PipelineConfig e = d, f = d;
    f.seed = 43;
    CHECK(config_hash(e) == config_hash(d));
    CHECK(config_hash(f) != config_hash(d));
    f = d;
    f.out = "elsewhere";
    CHECK(config_hash(f) == config_hash(d));
}

TEST_CASE("per-year workers report the earliest failing year", "[pipeline][threads]") {
    const std::vector<int> years = {2008, 2009, 2010, 2011};
    std::atomic<int> calls{0};
    CHECK_THROWS_WITH(detail::for_each_year(years, 4,
                                            [&](std::size_t i) {
                                                ++calls;
                                                if (i >= 1) throw DomainError("boom " + std::to_string(i));
                                            }),
                      ContainsSubstring("year 2009") && ContainsSubstring("boom 1"));
    CHECK(calls == 4);
    CHECK_THROWS_AS(detail::for_each_year(years, 2, [](std::size_t) { throw ValidationError("x"); }), ValidationError);
}
