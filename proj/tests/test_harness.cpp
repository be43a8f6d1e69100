#include <catch_amalgamated.hpp>

#include <cstdlib>

#include "jamcord/harness.hpp"
#include "jamcord/svg_plot.hpp"

using namespace jamcord;

namespace {

const std::string kData = JAMCORD_DATA_DIR;

nlohmann::json quick_base() {
  return resolve_scenario_json(nlohmann::json::parse(R"({
    "id": "q",
    "gripper": "prototype_gripper.json",
    "object": {"kind": "Cylinder", "diameter": 30.0},
    "protocol": {"press_depth": 30.0, "lift_distance": 10.0}
  })"),
                               kData);
}

GraspTrace fixture(const std::string& name) { return trace_from_csv(read_text(kData + "/fixtures/" + name)); }

std::size_t count(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = text.find(needle); p != std::string::npos; p = text.find(needle, p + 1)) ++n;
  return n;
}

}  // namespace

TEST_CASE("bundled scenario loads with the gripper file resolved", "[harness]") {
  const auto s = load_scenario(kData + "/scenarios/cylinder_200.json");
  CHECK(s.id == "cylinder_200");
  CHECK(s.gripper == GripperConfig{});
  CHECK(s.object.kind == ObjectKind::Cylinder);
  CHECK(s.protocol.pressure_B == 200.0);
}

TEST_CASE("missing referenced files are input errors", "[harness]") {
  auto j = nlohmann::json::parse(R"({"id":"x","gripper":"no_such.json","object":{"kind":"HalfPlane"}})");
  CHECK_THROWS_AS(resolve_scenario_json(j, kData), InvalidInput);
  CHECK_THROWS_AS(load_scenario(kData + "/no_such_scenario.json"), InvalidInput);
}

TEST_CASE("config dir from the environment is searched last", "[harness]") {
  const auto tmp = fs::temp_directory_path() / "jamcord_cfg_test";
  fs::create_directories(tmp);
  ::setenv("JAMCORD_CONFIG_DIR", kData.c_str(), 1);
  CHECK(resolve_config_path("prototype_gripper.json", tmp) == fs::path(kData) / "prototype_gripper.json");
  ::unsetenv("JAMCORD_CONFIG_DIR");
  CHECK_THROWS_AS(resolve_config_path("prototype_gripper.json", tmp), InvalidInput);
}

TEST_CASE("scenario ids and fields are checked", "[harness]") {
  auto j = quick_base();
  j["id"] = "a/b";
  CHECK_THROWS_AS(scenario_from_json(j), InvalidInput);
  j = quick_base();
  j["colour"] = "red";
  CHECK_THROWS_AS(scenario_from_json(j), InvalidInput);
  j = quick_base();
  j.erase("object");
  CHECK_THROWS_AS(scenario_from_json(j), InvalidInput);
}

TEST_CASE("summary carries max force and phase boundaries", "[harness]") {
  const auto o = run_scenario(scenario_from_json(quick_base()));
  CHECK(o.summary["max_holding_force_N"].get<double>() == max_holding_force(o.trace));
  const auto& ph = o.summary["phases"];
  CHECK(ph["press"]["first_row"] == 0);
  CHECK(ph["press"]["rows"] == 31);
  CHECK(ph["jam"]["first_row"] == 31);
  CHECK(ph["lift"]["first_row"] == ph["jam"]["first_row"].get<std::size_t>() + ph["jam"]["rows"].get<std::size_t>());
  CHECK(ph["lift"]["end_mm"] == 10.0);
  std::size_t rows = 0;
  for (const auto& [_, v] : ph.items()) rows += v["rows"].get<std::size_t>();
  CHECK(rows == o.trace.samples.size());
}

TEST_CASE("zero port-B pressure holds almost nothing", "[harness]") {
  auto j = quick_base();
  j["protocol"]["pressure_B"] = 0.0;
  CHECK(run_scenario(scenario_from_json(j)).summary["max_holding_force_N"].get<double>() < 0.5);
}

TEST_CASE("sweep paths", "[harness]") {
  nlohmann::json j = {{"a", {{"b", 1}}}};
  set_path(j, "a.b", 2);
  set_path(j, "a.c", 3);
  set_path(j, "x.y", 4);
  CHECK(j == nlohmann::json::parse(R"({"a":{"b":2,"c":3},"x":{"y":4}})"));
  CHECK_THROWS_AS(set_path(j, "a.b.c", 1), InvalidInput);
  CHECK_THROWS_AS(set_path(j, "a..b", 1), InvalidInput);
}

TEST_CASE("sweep expands the cartesian product in order", "[harness]") {
  SweepSpec s;
  s.base = quick_base();
  s.axes = {{"protocol.pressure_B", {100.0, 200.0}}, {"protocol.pressure_A", {10.0, 20.0, 50.0}}};
  const auto cells = expand_sweep(s);
  REQUIRE(cells.size() == 6);
  CHECK(cells[0].id == "q-0");
  CHECK(cells[5].id == "q-5");
  CHECK(cells[1].scenario["protocol"]["pressure_A"] == 20.0);
  CHECK(cells[3].scenario["protocol"]["pressure_B"] == 200.0);
  CHECK(cells[3].scenario["protocol"]["pressure_A"] == 10.0);
  CHECK(cells[4].params == std::vector<nlohmann::json>{200.0, 20.0});
  for (const auto& c : cells) CHECK(c.scenario["id"] == c.id);
}

TEST_CASE("sweep ids sort in cell order past ten cells", "[harness]") {
  SweepSpec s;
  s.base = quick_base();
  std::vector<nlohmann::json> v;
  for (int i = 0; i < 12; ++i) v.push_back(i);
  s.axes = {{"protocol.trials", v}};
  const auto cells = expand_sweep(s);
  CHECK(cells[2].id == "q-02");
  CHECK(cells[11].id == "q-11");
  CHECK(std::is_sorted(cells.begin(), cells.end(), [](auto& a, auto& b) { return a.id < b.id; }));
}

TEST_CASE("sweep cap is enforced", "[harness]") {
  SweepSpec s;
  s.base = quick_base();
  std::vector<nlohmann::json> v(101, 1.0);
  s.axes = {{"protocol.pressure_B", v}, {"protocol.pressure_A", std::vector<nlohmann::json>(100, 1.0)}};
  CHECK(sweep_size(s) == 10100);
  CHECK_THROWS_AS(expand_sweep(s), SweepTooLarge);
  s.cap = 20000;
  CHECK(expand_sweep(s).size() == 10100);
  CHECK(SweepSpec{}.cap == 10000);
}

TEST_CASE("sweep spec json", "[harness]") {
  const auto s = load_sweep(kData + "/scenarios/sweep_pressure_object.json");
  CHECK(s.axes.size() == 2);
  CHECK(s.parallelism == 4);
  CHECK(s.base["gripper"].is_object());
  CHECK(sweep_size(s) == 4);
  auto bad = nlohmann::json::parse(R"({"base":"cylinder_200.json","axes":[]})");
  CHECK_THROWS_AS(sweep_from_json(bad, kData + "/scenarios"), InvalidInput);
  bad = nlohmann::json::parse(R"({"base":"cylinder_200.json","axes":[{"path":"id","values":[1]}]})");
  CHECK_THROWS_AS(sweep_from_json(bad, kData + "/scenarios"), InvalidInput);
  bad = nlohmann::json::parse(R"({"base":"cylinder_200.json","axes":[{"path":"a","values":[1]}],"parallelism":0})");
  CHECK_THROWS_AS(sweep_from_json(bad, kData + "/scenarios"), InvalidInput);
}

TEST_CASE("parallel sweep matches the serial one", "[harness]") {
  SweepSpec s;
  s.base = quick_base();
  s.axes = {{"protocol.pressure_B", {50.0, 100.0, 200.0}}, {"object.diameter", {20.0, 30.0}}};
  s.parallelism = 1;
  const auto serial = run_sweep(s);
  s.parallelism = 4;
  const auto parallel = run_sweep(s);
  CHECK(aggregate_csv(s, serial) == aggregate_csv(s, parallel));
  REQUIRE(serial.size() == parallel.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    REQUIRE(serial[i].output);
    REQUIRE(parallel[i].output);
    CHECK(trace_to_csv(serial[i].output->trace) == trace_to_csv(parallel[i].output->trace));
  }
}

TEST_CASE("single-cell sweep reproduces the plain run", "[harness]") {
  SweepSpec s;
  s.base = quick_base();
  s.axes = {{"protocol.pressure_B", {200.0}}};
  const auto r = run_sweep(s);
  REQUIRE(r.size() == 1);
  REQUIRE(r[0].output);
  const auto plain = run_scenario(scenario_from_json(quick_base()));
  CHECK(trace_to_csv(r[0].output->trace) == trace_to_csv(plain.trace));
}

TEST_CASE("a failing cell is reported and the rest still run", "[harness]") {
  SweepSpec s;
  s.base = quick_base();
  s.base["protocol"]["solver"] = {{"moment_tolerance", 1e-30}, {"max_contact_updates", 0}};
  s.axes = {{"protocol.solver.max_iterations", {1}}, {"object.diameter", {30.0}}};
  auto r = run_sweep(s);
  REQUIRE(r.size() == 1);
  CHECK(r[0].status == "solver_failure");
  CHECK(r[0].failure);
  const auto csv = aggregate_csv(s, r);
  CHECK(csv.find(",,solver_failure\n") != std::string::npos);

  s.axes = {{"object.diameter", {30.0, -1.0}}};
  s.base["protocol"].erase("solver");
  r = run_sweep(s);
  CHECK(r[0].status == "ok");
  CHECK(r[1].status == "invalid");
}

TEST_CASE("seeded noise differs per cell and repeats per seed", "[harness]") {
  SweepSpec s;
  s.base = quick_base();
  s.axes = {{"protocol.pressure_B", {200.0, 200.0}}};
  NoiseHook h;
  h.seed = 11;
  const auto a = run_sweep(s, h), b = run_sweep(s, h);
  CHECK(trace_to_csv(a[0].output->trace) == trace_to_csv(b[0].output->trace));
  CHECK(trace_to_csv(a[0].output->trace) != trace_to_csv(a[1].output->trace));
}

TEST_CASE("aggregate csv quotes structured values", "[harness]") {
  CHECK(csv_cell("plain") == "plain");
  CHECK(csv_cell(R"({"a":1,"b":2})") == R"("{""a"":1,""b"":2}")");
}

// ---- svg ----

TEST_CASE("svg overlay has one polyline per trace and phase", "[svg]") {
  const auto a = fixture("membrane_baseline.csv"), b = fixture("torus_synthetic.csv");
  PlotOptions press;
  press.phase = Phase::Press;
  const auto svg = plot_svg({{"a", a}, {"b", b}}, press);
  CHECK(count(svg, "<polyline") == 2);
  CHECK(count(svg, "displacement [mm]") == 1);
  CHECK(count(svg, "force [N]") == 1);
  CHECK(count(plot_svg({{"a", a}, {"b", b}}), "<polyline") == 4);
  CHECK(plot_svg({{"a", a}}) == plot_svg({{"a", a}}));
}

TEST_CASE("svg points follow the data", "[svg]") {
  GraspTrace t;
  t.samples = {{0.0, 0.0, Phase::Press}, {10.0, 5.0, Phase::Press}};
  PlotOptions o;
  const auto svg = plot_svg({{"t", t}}, o);
  // plot box: x 70..620 over 0..10, y 20..365 over 0..5
  CHECK(svg.find("points=\"70.00,365.00 620.00,20.00\"") != std::string::npos);
}

TEST_CASE("svg escapes labels", "[svg]") {
  GraspTrace t;
  t.samples = {{0.0, 1.0, Phase::Lift}, {1.0, 2.0, Phase::Lift}};
  const auto svg = plot_svg({{"a<b & \"c\"", t}});
  CHECK(svg.find("a&lt;b &amp; &quot;c&quot;") != std::string::npos);
  CHECK(svg.find("a<b") == std::string::npos);
}

TEST_CASE("svg rejects empty input", "[svg]") {
  CHECK_THROWS_AS(plot_svg({}), InvalidInput);
  PlotOptions jam;
  jam.phase = Phase::Jam;
  CHECK_THROWS_AS(plot_svg({{"a", fixture("membrane_baseline.csv")}}, jam), InvalidInput);
}

TEST_CASE("svg matches the committed golden file", "[svg]") {
  PlotOptions o;
  o.title = "membrane vs torus (synthetic)";
  const auto svg = plot_svg({{"membrane_baseline", fixture("membrane_baseline.csv")},
                             {"torus_synthetic", fixture("torus_synthetic.csv")}},
                            o);
  CHECK(svg == read_text(kData + "/fixtures/golden_overlay.svg"));
}
