#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
};

// Runs the CLI with stdout captured and stderr discarded.
Result cli(const std::string& args) {
  const std::string cmd = std::string(LESION_CLI) + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string out;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) out.append(buf, n);
  const int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("lesion_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

bool same_tree(const fs::path& a, const fs::path& b) {
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    ++files;
    const fs::path other = b / fs::relative(e.path(), a);
    if (!fs::exists(other) || read_file(e.path()) != read_file(other)) return false;
  }
  std::size_t other_files = 0;
  for (const auto& e : fs::recursive_directory_iterator(b)) other_files += e.is_regular_file();
  return files == other_files && files > 0;
}

const char* kTiny = "--config image_height=8 --config image_width=8 --config embed_dim=8 --config num_heads=2 "
                    "--config num_layers=1 --config epochs=2 --config batch_size=4 --config learning_rate=0.003";

}  // namespace

TEST_CASE("synth: reproducible directories, row count, exact quotas") {
  const fs::path dir = scratch("synth");
  const auto a = cli("synth --out " + (dir / "a").string() + " --n 8 --seed 1");
  const auto b = cli("synth --out " + (dir / "b").string() + " --n 8 --seed 1");
  CHECK(a.code == 0);
  CHECK(b.code == 0);
  CHECK(same_tree(dir / "a", dir / "b"));
  const std::string manifest = read_file(dir / "a" / "manifest.csv");
  CHECK(std::count(manifest.begin(), manifest.end(), '\n') == 9);  // header + 8 rows

  const auto c = cli("synth --out " + (dir / "c").string() + " --n 100 --seed 1 --imbalance 60,30,10");
  CHECK(c.code == 0);
  CHECK(c.out.find("60 30 10") != std::string::npos);
}

TEST_CASE("usage errors exit 1") {
  CHECK(cli("").code == 1);
  CHECK(cli("frobnicate").code == 1);
  CHECK(cli("synth").code == 1);
  CHECK(cli("synth --out /tmp/x --n 4 --size 30 30 --patch 4").code == 1);
  const fs::path dir = scratch("usage");
  REQUIRE(cli("synth --out " + (dir / "d").string() + " --n 8 --size 8 8").code == 0);
  const auto r = cli("train --data " + (dir / "d" / "manifest.csv").string() + " --out " +
                     (dir / "m.ckpt").string() + " --config colour=blue");
  CHECK(r.code == 1);
  CHECK(cli("--help").code == 0);
}

TEST_CASE("train, eval, gradcam: reproducible outputs and data errors") {
  const fs::path dir = scratch("train");
  REQUIRE(cli("synth --out " + (dir / "d").string() + " --n 24 --seed 3 --size 8 8").code == 0);
  const std::string data = (dir / "d" / "manifest.csv").string();

  const auto t1 = cli("train --data " + data + " " + kTiny + " --out " + (dir / "a.ckpt").string() + " --log " +
                      (dir / "a.log").string());
  const auto t2 = cli("train --data " + data + " " + kTiny + " --out " + (dir / "b.ckpt").string());
  REQUIRE(t1.code == 0);
  REQUIRE(t2.code == 0);
  CHECK(read_file(dir / "a.ckpt") == read_file(dir / "b.ckpt"));
  CHECK(t1.out.find("ACC") != std::string::npos);

  const std::string log = read_file(dir / "a.log");
  CHECK(log.rfind("step,epoch,l_ce,l_attn,total\n", 0) == 0);

  const auto dumped = cli("train --data " + data + " " + kTiny + " --out " + (dir / "c.ckpt").string() +
                          " --dump-config");
  CHECK(dumped.out.find("embed_dim=8") != std::string::npos);
  CHECK(dumped.out.find("lambda_attn=0.1") != std::string::npos);

  const auto e1 = cli("eval --data " + data + " --ckpt " + (dir / "a.ckpt").string());
  const auto e2 = cli("eval --data " + data + " --ckpt " + (dir / "a.ckpt").string());
  CHECK(e1.code == 0);
  CHECK(e1.out == e2.out);
  const auto acc = e1.out.find("ACC"), auc = e1.out.find("AUC"), f1 = e1.out.find("F1-Score"),
             prec = e1.out.find("Precision");
  CHECK(acc < auc);
  CHECK(auc < f1);
  CHECK(f1 < prec);
  CHECK(prec != std::string::npos);

  const std::string image = (dir / "d" / "images" / "synth_00000.ppm").string();
  const auto g1 = cli("gradcam --image " + image + " --ckpt " + (dir / "a.ckpt").string() + " --class 0 --out " +
                      (dir / "g1").string());
  const auto g2 = cli("gradcam --image " + image + " --ckpt " + (dir / "a.ckpt").string() + " --class 0 --out " +
                      (dir / "g2").string());
  CHECK(g1.code == 0);
  CHECK(g1.out.find("argmax=") != std::string::npos);
  CHECK(read_file(dir / "g1.heat.pgm") == read_file(dir / "g2.heat.pgm"));
  CHECK(read_file(dir / "g1.overlay.ppm") == read_file(dir / "g2.overlay.ppm"));
  const std::string heat = read_file(dir / "g1.heat.pgm");
  const std::string header = "P5\n8 8\n255\n";
  REQUIRE(heat.rfind(header, 0) == 0);
  const std::string raster = heat.substr(header.size());
  const auto peak = static_cast<unsigned char>(*std::max_element(raster.begin(), raster.end(), [](char a, char b) {
    return static_cast<unsigned char>(a) < static_cast<unsigned char>(b);
  }));
  CHECK((peak == 255 || peak == 0));

  CHECK(cli("gradcam --image " + image + " --ckpt " + (dir / "a.ckpt").string() + " --class 7 --out " +
            (dir / "g3").string())
            .code == 1);
  CHECK(cli("eval --data " + data + " --ckpt " + (dir / "missing.ckpt").string()).code == 2);
  CHECK(cli("eval --data " + (dir / "nope.csv").string() + " --ckpt " + (dir / "a.ckpt").string()).code == 2);

  // Spatial dims are resized on ingest; a channel mismatch cannot be, and the
  // error names both shapes. Masks are gray, so point the images at them.
  std::string gray = read_file(dir / "d" / "manifest.csv");
  for (std::size_t pos; (pos = gray.find("images/")) != std::string::npos;) gray.replace(pos, 7, "masks/");
  for (std::size_t pos; (pos = gray.find(".ppm")) != std::string::npos;) gray.replace(pos, 4, ".pgm");
  std::ofstream(dir / "d" / "gray.csv") << gray;
  const std::string cmd = std::string(LESION_CLI) + " eval --data " + (dir / "d" / "gray.csv").string() +
                          " --ckpt " + (dir / "a.ckpt").string() + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  std::string err;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) err.append(buf, n);
  const int status = pclose(pipe);
  CHECK(WEXITSTATUS(status) == 2);
  CHECK(err.find("8x8x1") != std::string::npos);
  CHECK(err.find("8x8x3") != std::string::npos);
}

TEST_CASE("maskless data trains with lambda zero; resume continues the log") {
  const fs::path dir = scratch("maskless");
  REQUIRE(cli("synth --out " + (dir / "d").string() + " --n 12 --seed 4 --size 8 8").code == 0);
  std::ofstream(dir / "d" / "nomask.csv") << [&] {
    std::string text = read_file(dir / "d" / "manifest.csv");
    std::istringstream in(text);
    std::string line, out;
    std::getline(in, line);
    out = "image,label\n";
    while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + "\n";
    return out;
  }();
  const std::string base = "train --data " + (dir / "d" / "nomask.csv").string() + " " + kTiny +
                           " --config lambda_attn=0 --config epochs=2";
  const auto r = cli(base + " --steps 2 --out " + (dir / "a.ckpt").string() + " --log " + (dir / "a.log").string());
  CHECK(r.code == 0);
  const std::string first = read_file(dir / "a.log");

  const auto resumed = cli("train --data " + (dir / "d" / "nomask.csv").string() + " --resume " +
                           (dir / "a.ckpt").string() + " --out " +
                           (dir / "b.ckpt").string() + " --log " + (dir / "a.log").string());
  CHECK(resumed.code == 0);
  const std::string both = read_file(dir / "a.log");
  CHECK(both.size() > first.size());
  CHECK(both.rfind(first, 0) == 0);
  CHECK(std::count(first.begin(), first.end(), '\n') == 3);
  CHECK(resumed.out.find("trained 6 steps") != std::string::npos);
}

TEST_CASE("numeric blow-up exits 3") {
  const fs::path dir = scratch("numeric");
  REQUIRE(cli("synth --out " + (dir / "d").string() + " --n 8 --seed 5 --size 8 8").code == 0);
  const auto r = cli("train --data " + (dir / "d" / "manifest.csv").string() + " " + kTiny +
                     " --config learning_rate=1e300 --config epochs=3 --out " + (dir / "a.ckpt").string());
  CHECK(r.code == 3);
}
