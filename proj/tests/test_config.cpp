#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "attt/config.hpp"

using namespace attt;

TEST_CASE("config set/get and unknown-key rejection") {
    ExperimentConfig cfg;
    cfg.set("train.batch_size", "6");
    CHECK(cfg.train_batch_size == 6);
    CHECK(cfg.get("train.batch_size") == "6");
    cfg.set("ttt.mode", "both");
    CHECK(cfg.ttt_config().mode == TTTMode::both);
    CHECK_THROWS_AS(cfg.set("no.such.key", "1"), ConfigError);
    CHECK_THROWS_AS(cfg.set("train.batch_size", "abc"), ConfigError);
    CHECK_THROWS_AS(cfg.set("train.use_adaptor", "maybe"), ConfigError);
}

TEST_CASE("config text round-trip covers every key") {
    ExperimentConfig cfg;
    cfg.seed = 99;
    cfg.synth_image_size = 32;
    cfg.train_gp_lambda = 7.5;
    cfg.ttt_continual = true;
    const std::string text = cfg.to_text();

    const std::string path = "test_cfg_tmp.cfg";
    {
        std::ofstream f(path);
        f << text;
    }
    ExperimentConfig rt = ExperimentConfig::from_file(path);
    for (const auto& key : ExperimentConfig::keys()) CHECK(rt.get(key) == cfg.get(key));
    std::filesystem::remove(path);
}

TEST_CASE("config file parsing: comments, includes, errors") {
    namespace fs = std::filesystem;
    fs::create_directories("test_cfg_dir");
    {
        std::ofstream base("test_cfg_dir/base.cfg");
        base << "# defaults for the tiny rig\n";
        base << "train.batch_size = 4\n";
        base << "net.unet_base = 8\n";
    }
    {
        std::ofstream top("test_cfg_dir/top.cfg");
        top << "include = base.cfg\n";
        top << "net.unet_base = 2  # override the include\n";
        top << "seed = 41\n";
    }
    ExperimentConfig cfg = ExperimentConfig::from_file("test_cfg_dir/top.cfg");
    CHECK(cfg.train_batch_size == 4);
    CHECK(cfg.net_unet_base == 2);
    CHECK(cfg.seed == 41);

    {
        std::ofstream bad("test_cfg_dir/bad.cfg");
        bad << "not a key value line\n";
    }
    CHECK_THROWS_AS(ExperimentConfig::from_file("test_cfg_dir/bad.cfg"), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_file("test_cfg_dir/missing.cfg"), ConfigError);
    fs::remove_all("test_cfg_dir");
}

TEST_CASE("derived module configs carry the right fields") {
    ExperimentConfig cfg;
    cfg.train_use_smoothness = false;
    cfg.ttt_unit = "slice";
    cfg.ttt_adapt_first_k = 3;
    NetConfig n = cfg.net_config();
    CHECK_FALSE(n.smooth_disc);
    TrainConfig t = cfg.train_config();
    CHECK_FALSE(t.use_smoothness);
    CHECK(t.batch_size == 12);
    CHECK(t.learning_rate == 1e-4);
    TTTConfig tt = cfg.ttt_config();
    CHECK(tt.unit == TTTUnit::slice);
    CHECK(tt.patience == 200);
    CHECK(tt.max_iter == 1000);
    CHECK(tt.adapt_first_k == 3);

    cfg.ttt_mode = "bogus";
    CHECK_THROWS_AS(cfg.ttt_config(), ConfigError);
}

TEST_CASE("run manifest writes atomically") {
    namespace fs = std::filesystem;
    const std::string dir = "test_manifest_tmp";
    fs::remove_all(dir);
    RunManifest m;
    m.command = "train";
    m.started_at = timestamp_utc();
    m.seed = 5;
    m.config_text = "seed = 5\n";
    m.write(dir);
    CHECK(fs::exists(dir + "/manifest.json"));
    CHECK_FALSE(fs::exists(dir + "/manifest.json.tmp"));
    m.status = "done";
    m.finished_at = timestamp_utc();
    m.artifacts = {"history.csv"};
    m.write(dir);
    std::ifstream f(dir + "/manifest.json");
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    CHECK(text.find("\"done\"") != std::string::npos);
    CHECK(text.find("history.csv") != std::string::npos);
    fs::remove_all(dir);
}
