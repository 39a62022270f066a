#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "fedem/manifest.hpp"

using namespace fedem;
namespace fs = std::filesystem;

namespace {

std::string kMinimal =
    "[federation]\n"
    "defense = \"none\"\n";

ExperimentManifest from_text(const std::string& text, const std::string& origin = "mem") {
  return ExperimentManifest::from_doc(parse_toml(text, origin), origin);
}

struct TempDir {
  fs::path dir;
  explicit TempDir(const std::string& tag) {
    dir = fs::temp_directory_path() / ("fedem-test-" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~TempDir() { fs::remove_all(dir); }
  std::string file(const std::string& name, const std::string& text) const {
    fs::path p = dir / name;
    std::ofstream(p) << text;
    return p.string();
  }
};

}  // namespace

TEST_CASE("toml subset parses strings numbers bools and arrays") {
  TomlDoc d = parse_toml(
      "# leading comment\n"
      "[run]\n"
      "name = \"has \\\"quotes\\\" and\\na newline\"  # trailing comment\n"
      "seed = 17\n"
      "[dataset]\n"
      "normalize = false\n"
      "mean = [0.5, 0.25]\n"
      "[model]\n"
      "hidden = []\n"
      "[sweepish]\n",
      "mem");
  CHECK(d.get("run", "name").str == "has \"quotes\" and\na newline");
  CHECK(d.get("run", "seed").num == 17.0);
  CHECK(d.get("dataset", "normalize").boolean == false);
  REQUIRE(d.get("dataset", "mean").kind == TomlValue::Kind::kNumberList);
  CHECK(d.get("dataset", "mean").num_list == std::vector<double>{0.5, 0.25});
  CHECK(d.get("model", "hidden").num_list.empty());
  CHECK(d.sections.count("sweepish") == 1);  // empty section is legal
  CHECK(d.has("run", "seed"));
  CHECK_FALSE(d.has("run", "nope"));
  CHECK_THROWS_AS(d.get("run", "nope"), ConfigError);
  CHECK_THROWS_AS(d.get("absent", "x"), ConfigError);
}

TEST_CASE("hash inside a quoted string is not a comment") {
  TomlDoc d = parse_toml("[run]\nname = \"a#b\"\n", "mem");
  CHECK(d.get("run", "name").str == "a#b");
}

TEST_CASE("string arrays parse and reject mixed types") {
  TomlDoc d = parse_toml("[sweep]\nvalues = [\"a\", \"b,c\"]\n", "mem");
  CHECK(d.get("sweep", "values").str_list == std::vector<std::string>{"a", "b,c"});
  CHECK_THROWS_AS(parse_toml("[s]\nv = [\"a\", 2]\n", "mem"), ConfigError);
  CHECK_THROWS_AS(parse_toml("[s]\nv = [1, \"a\"]\n", "mem"), ConfigError);
}

TEST_CASE("parse errors carry origin and line number") {
  auto msg_of = [](const std::string& text) {
    try {
      parse_toml(text, "f.toml");
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(msg_of("[run]\nseed = 1\nseed = 2\n") ==
        "f.toml:3: duplicate key 'seed' in [run]");
  CHECK(msg_of("seed = 1\n").substr(0, 9) == "f.toml:1:");
  CHECK(msg_of("[run\n").substr(0, 9) == "f.toml:1:");
  CHECK(msg_of("[run]\nname = \"open\n").substr(0, 9) == "f.toml:2:");
  CHECK(msg_of("[run]\nx = [1, 2\n").substr(0, 9) == "f.toml:2:");
  CHECK(msg_of("[run]\nx = 1e\n").substr(0, 9) == "f.toml:2:");
  CHECK(msg_of("[run]\njust a line\n").substr(0, 9) == "f.toml:2:");
  CHECK(msg_of("[run]\nbad key! = 1\n").substr(0, 9) == "f.toml:2:");
}

TEST_CASE("unknown sections and keys are rejected") {
  CHECK_THROWS_WITH_AS(from_text("[mystery]\nx = 1\n"), "unknown section [mystery]",
                       ConfigError);
  CHECK_THROWS_WITH_AS(from_text("[run]\ntypo = 1\n"), "unknown key 'typo' in [run]",
                       ConfigError);
}

TEST_CASE("manifest defaults") {
  ExperimentManifest m = from_text(kMinimal);
  CHECK(m.name == "run");
  CHECK(m.seed == 1);
  CHECK(m.output_root == "runs");
  CHECK(m.attack_rounds.empty());
  CHECK(m.dataset_kind == "synth");
  CHECK(m.fed.defense == Defense::kNone);
  CHECK(m.noise.mechanism == NoiseSpec::Mechanism::kNone);
  CHECK(m.model.kind == ModelSpec::Kind::kMlp);
  CHECK(m.model.activation == Activation::kSigmoid);
}

TEST_CASE("manifest field validation") {
  CHECK_THROWS_AS(from_text("[run]\nseed = -1\n"), ConfigError);
  CHECK_THROWS_AS(from_text("[run]\nseed = 1.5\n"), ConfigError);
  CHECK_THROWS_AS(from_text("[run]\nname = \"has space\"\n"), ConfigError);
  CHECK_THROWS_AS(from_text("[run]\nname = \"\"\n"), ConfigError);
  CHECK_THROWS_AS(from_text("[run]\nattack_rounds = [0]\n"), ConfigError);
  CHECK_THROWS_AS(from_text("[run]\nattack_rounds = [1.5]\n"), ConfigError);
  CHECK_THROWS_AS(from_text("[run]\nseed = \"x\"\n"), ConfigError);  // type error
  CHECK_THROWS_AS(from_text("[dataset]\nkind = \"csv\"\n"), ConfigError);
  CHECK_THROWS_AS(from_text("[dataset]\nkind = \"idx\"\n"), ConfigError);  // dir required
  CHECK_THROWS_AS(from_text("[dataset]\nmean = [0.5]\n"), ConfigError);   // std missing
  CHECK_THROWS_AS(from_text("[dataset]\nmean = [0.5]\nstd = [0]\n"), ConfigError);
  CHECK_THROWS_AS(from_text("[dataset]\nclasses = 1\n"), ConfigError);
  CHECK_THROWS_AS(from_text("[model]\nkind = \"transformer\"\n"), ConfigError);
  CHECK_THROWS_AS(from_text("[model]\nhidden = [0]\n"), ConfigError);
  CHECK_THROWS_AS(from_text("[model]\nactivation = \"relu\"\n"), ConfigError);
  CHECK_THROWS_AS(from_text("[federation]\ndefense = \"magic\"\n"), ConfigError);
  CHECK_THROWS_AS(from_text("[federation]\nclients = 0\n"), ConfigError);
  CHECK_THROWS_AS(from_text("[federation]\nclients_per_round = 9\n"), ConfigError);
  CHECK_THROWS_AS(from_text("[attack]\nlabel_mode = \"guess\"\n"), ConfigError);
  CHECK_THROWS_AS(from_text("[attack]\ninit = \"zeros\"\n"), ConfigError);
  CHECK_THROWS_AS(
      from_text("[federation]\nrounds = 3\n\n[run]\nattack_rounds = [1, 4]\n"),
      ConfigError);
  CHECK_NOTHROW(from_text("[federation]\nrounds = 3\n\n[run]\nattack_rounds = [1, 3]\n"));
}

TEST_CASE("defense chooses the noise mapping") {
  std::string ldp = "[ldp]\nsigma = 0.25\nb = 0.5\nclip = 2\n\n[federation]\ndefense = ";
  ExperimentManifest g = from_text(ldp + "\"ldp-gaussian\"\n");
  CHECK(g.noise.mechanism == NoiseSpec::Mechanism::kGaussian);
  CHECK(g.noise.scale == 0.25);
  CHECK(g.noise.clip == 0.0);
  ExperimentManifest l = from_text(ldp + "\"ldp-laplace\"\n");
  CHECK(l.noise.mechanism == NoiseSpec::Mechanism::kLaplace);
  CHECK(l.noise.scale == 0.5);
  ExperimentManifest c = from_text(ldp + "\"dp-clip\"\n");
  CHECK(c.noise.mechanism == NoiseSpec::Mechanism::kGaussian);
  CHECK(c.noise.clip == 2.0);
  ExperimentManifest n = from_text(ldp + "\"fedem\"\n");
  CHECK(n.noise.mechanism == NoiseSpec::Mechanism::kNone);
  // dp-clip without a positive radius is rejected
  CHECK_THROWS_AS(from_text("[federation]\ndefense = \"dp-clip\"\n[ldp]\nsigma = 0.1\n"),
                  ConfigError);
}

TEST_CASE("perturbation settings only validate under the fedem defense") {
  std::string bad = "[fedem]\nrho_max = -1\n";
  CHECK_NOTHROW(from_text(bad));  // defense = none ignores the block
  CHECK_THROWS_AS(from_text(bad + "[federation]\ndefense = \"fedem\"\n"), ConfigError);
}

TEST_CASE("sign-step size defaults to a quarter of the outer radius") {
  ExperimentManifest m = from_text("[federation]\ndefense = \"fedem\"\n[fedem]\nrho_max = 6\n");
  CHECK(m.perturb.alpha == doctest::Approx(1.5));
  ExperimentManifest e = from_text("[fedem]\nrho_max = 6\nalpha = 0.5\n");
  CHECK(e.perturb.alpha == 0.5);
}

TEST_CASE("relative dataset dir is anchored at the manifest location") {
  std::string text = "[dataset]\nkind = \"idx\"\ndir = \"../data/digits\"\n";
  CHECK(from_text(text, "/a/b/m.toml").dataset_dir == "/a/b/../data/digits");
  CHECK(from_text(text, "mem").dataset_dir == "../data/digits");  // no anchor available
  std::string abs = "[dataset]\nkind = \"idx\"\ndir = \"/data/digits\"\n";
  CHECK(from_text(abs, "/a/b/m.toml").dataset_dir == "/data/digits");
}

TEST_CASE("attack round defaults cover the first and last round") {
  ExperimentManifest m = from_text("[federation]\nrounds = 7\n");
  CHECK(m.resolved_attack_rounds() == std::vector<int>{1, 7});
  ExperimentManifest one = from_text("[federation]\nrounds = 1\n");
  CHECK(one.resolved_attack_rounds() == std::vector<int>{1});
  ExperimentManifest ex = from_text("[federation]\nrounds = 9\n[run]\nattack_rounds = [5, 2, 5]\n");
  CHECK(ex.resolved_attack_rounds() == std::vector<int>{2, 5});
}

TEST_CASE("echo is a fixed point through the parser") {
  std::string text =
      "[run]\n"
      "name = \"echo-check\"\n"
      "seed = 99\n"
      "attack_rounds = [2, 5]\n"
      "\n[dataset]\n"
      "kind = \"synth\"\n"
      "classes = 3\n"
      "per_class = 11\n"
      "dims = 7\n"
      "mean = [0.130700000001, 0.25]\n"
      "std = [0.308100000001, 0.5]\n"
      "\n[model]\n"
      "hidden = [32, 16]\n"
      "activation = \"tanh\"\n"
      "\n[federation]\n"
      "clients = 3\n"
      "rounds = 5\n"
      "lr = 0.07\n"
      "defense = \"ldp-laplace\"\n"
      "\n[ldp]\n"
      "b = 0.015\n"
      "\n[attack]\n"
      "enabled = true\n"
      "label_mode = \"known\"\n";
  ExperimentManifest m = from_text(text);
  std::string once = m.echo();
  ExperimentManifest back = from_text(once);
  CHECK(back.echo() == once);
  CHECK(back.seed == 99);
  CHECK(back.fed.lr == m.fed.lr);
  CHECK(back.noise.scale == m.noise.scale);
  CHECK(back.mean_override == m.mean_override);
  CHECK(back.model.hidden == m.model.hidden);
  CHECK(back.attack.label_mode == AttackConfig::LabelMode::kKnown);
}

TEST_CASE("echo reproduces doubles that need full precision") {
  ExperimentManifest m = from_text(kMinimal);
  m.fed.lr = 1.0 / 3.0;
  m.perturb.eta_u = 0.1 + 0.2;  // 0.30000000000000004
  ExperimentManifest back = from_text(m.echo());
  CHECK(back.fed.lr == m.fed.lr);
  CHECK(back.perturb.eta_u == m.perturb.eta_u);
}

TEST_CASE("manifest files load with path-anchored errors") {
  TempDir td("manifest-load");
  std::string p = td.file("exp.toml", "[run]\nseed = \"x\"\n");
  CHECK_THROWS_AS(ExperimentManifest::load(p), ConfigError);
  CHECK_THROWS_WITH_AS(ExperimentManifest::load((td.dir / "absent.toml").string()),
                       ("cannot open manifest: " + (td.dir / "absent.toml").string()).c_str(),
                       ConfigError);
}

TEST_CASE("sweep spec loads and instantiates derived runs") {
  TempDir td("sweep");
  td.file("base.toml",
          "[run]\nname = \"smoke\"\n\n[federation]\ndefense = \"fedem\"\n\n"
          "[fedem]\nrho_max = 8\nrho_min = 0.5\niterations = 5\n\n"
          "[ldp]\nsigma = 0.25\nb = 0.125\nclip = 3\n");
  std::string iter = td.file(
      "iter.toml", "[sweep]\naxis = \"perturb-iterations\"\nvalues = [1, 3]\nbase = \"base.toml\"\n");

  SweepSpec sw = SweepSpec::load(iter);
  REQUIRE(sw.count() == 2);
  CHECK(sw.base.name == "smoke");
  ExperimentManifest m1 = sw.instantiate(1);
  CHECK(m1.name == "smoke-perturb-iterations-3");
  CHECK(m1.perturb.iterations == 3);
  CHECK(m1.perturb.rho_max == 8.0);  // everything else inherited

  std::string rho = td.file(
      "rho.toml", "[sweep]\naxis = \"rho-min\"\nvalues = [0, 2.5]\nbase = \"base.toml\"\n");
  SweepSpec sr = SweepSpec::load(rho);
  ExperimentManifest r1 = sr.instantiate(1);
  CHECK(r1.name == "smoke-rho-min-2p5");  // dots become 'p' in run names
  CHECK(r1.perturb.rho_min == 2.5);

  std::string method = td.file(
      "method.toml",
      "[sweep]\naxis = \"method\"\nvalues = [\"none\", \"ldp-laplace\", \"dp-clip\"]\nbase = \"base.toml\"\n");
  SweepSpec sm = SweepSpec::load(method);
  CHECK(sm.instantiate(0).noise.mechanism == NoiseSpec::Mechanism::kNone);
  ExperimentManifest lap = sm.instantiate(1);
  CHECK(lap.name == "smoke-method-ldp-laplace");
  CHECK(lap.fed.defense == Defense::kLdpLaplace);
  CHECK(lap.noise.mechanism == NoiseSpec::Mechanism::kLaplace);
  CHECK(lap.noise.scale == 0.125);  // remapped from the base [ldp] block
  ExperimentManifest clip = sm.instantiate(2);
  CHECK(clip.noise.clip == 3.0);
  CHECK(clip.noise.scale == 0.25);
}

TEST_CASE("sweep spec validation") {
  TempDir td("sweep-bad");
  std::string base = td.file("base.toml",
                             "[federation]\ndefense = \"fedem\"\n\n[fedem]\nrho_max = 8\n");
  auto sweep_with = [&](const std::string& name, const std::string& body) {
    return td.file(name, body);
  };
  CHECK_THROWS_AS(SweepSpec::load(sweep_with(
                      "a.toml", "[sweep]\naxis = \"nope\"\nvalues = [1]\nbase = \"base.toml\"\n")),
                  ConfigError);
  CHECK_THROWS_AS(SweepSpec::load(sweep_with(
                      "b.toml", "[sweep]\naxis = \"perturb-iterations\"\nvalues = [0]\nbase = \"base.toml\"\n")),
                  ConfigError);
  CHECK_THROWS_AS(SweepSpec::load(sweep_with(
                      "c.toml", "[sweep]\naxis = \"rho-min\"\nvalues = [-1]\nbase = \"base.toml\"\n")),
                  ConfigError);
  CHECK_THROWS_AS(SweepSpec::load(sweep_with(
                      "d.toml", "[sweep]\naxis = \"method\"\nvalues = [1]\nbase = \"base.toml\"\n")),
                  ConfigError);
  CHECK_THROWS_AS(SweepSpec::load(sweep_with(
                      "e.toml", "[sweep]\naxis = \"method\"\nvalues = [\"bogus\"]\nbase = \"base.toml\"\n")),
                  ConfigError);
  CHECK_THROWS_AS(SweepSpec::load(sweep_with(
                      "f.toml", "[sweep]\naxis = \"method\"\nvalues = []\nbase = \"base.toml\"\n")),
                  ConfigError);
  CHECK_THROWS_AS(SweepSpec::load(sweep_with(
                      "g.toml", "[sweep]\naxis = \"perturb-iterations\"\nvalues = [1]\n")),
                  ConfigError);  // base missing
  CHECK_THROWS_AS(SweepSpec::load(sweep_with(
                      "h.toml", "[sweep]\naxis = \"perturb-iterations\"\nvalues = [1]\nbase = \"base.toml\"\nextra = 1\n")),
                  ConfigError);
  CHECK_THROWS_AS(SweepSpec::load(sweep_with(
                      "i.toml", "[other]\nx = 1\n")),
                  ConfigError);
  // swept key must be explicit in the base manifest
  td.file("base2.toml", "[federation]\ndefense = \"fedem\"\n\n[fedem]\nrho_max = 8\niterations = 5\n");
  CHECK_NOTHROW(SweepSpec::load(sweep_with(
      "j.toml", "[sweep]\naxis = \"perturb-iterations\"\nvalues = [2]\nbase = \"base2.toml\"\n")));
  CHECK_THROWS_AS(SweepSpec::load(sweep_with(
                      "k.toml", "[sweep]\naxis = \"rho-min\"\nvalues = [0]\nbase = \"base2.toml\"\n")),
                  ConfigError);
}
