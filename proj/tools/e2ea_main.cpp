// e2ea command-line tool: train / lm-train / decode / eval / gradcheck /
// gen-data over the synthetic character-transduction task.
//
// Copyright 2026 e2ea authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#include <atomic>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "e2ea/checkpoint.hpp"
#include "e2ea/config.hpp"
#include "e2ea/decode.hpp"
#include "e2ea/gradcheck_suite.hpp"
#include "e2ea/model.hpp"
#include "e2ea/train.hpp"

namespace {

using namespace e2ea;

constexpr int kExitCheckFailure = 1;
constexpr int kExitBadConfig = 2;
constexpr int kExitIoError = 3;

// Dataset substreams: train / dev / test splits are disjoint.
constexpr std::uint64_t kTrainStream = 0, kDevStream = 1, kTestStream = 2;

std::string labels_to_string(const LabelSequence& seq) {
  std::string s;
  for (int c : seq) {
    if (c >= 1 && c <= 26) {
      s.push_back(static_cast<char>('a' + c - 1));
    } else {
      s += "<" + std::to_string(c) + ">";
    }
  }
  if (s.empty()) s = "*";  // empty-sequence marker
  return s;
}

LabelSequence string_to_labels(const std::string& s) {
  LabelSequence seq;
  if (s == "*") return seq;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '<') {
      std::size_t end = s.find('>', i);
      E2EA_CHECK(end != std::string::npos, "bad label string: " + s);
      seq.push_back(std::stoi(s.substr(i + 1, end - i - 1)));
      i = end;
    } else {
      seq.push_back(s[i] - 'a' + 1);
    }
  }
  return seq;
}

Checkpoint make_checkpoint(const ParamStore& ps, const RunConfig& cfg,
                           int epoch) {
  Checkpoint ckpt = checkpoint_from_params(ps);
  ckpt.set_meta("epoch", epoch);
  ckpt.set_meta("seed", static_cast<double>(ps.seed()));
  ckpt.set_meta("config_hash", static_cast<double>(config_hash(cfg)));
  return ckpt;
}

double greedy_dev_cer(Model& model, const std::vector<Utterance>& dev) {
  BeamConfig bc;
  bc.beam_width = 1;
  bc.mode = DecodeMode::kAttention;
  long dist = 0, reflen = 0;
  for (const Utterance& utt : dev) {
    Mat enc = model.encode(model.make_features(utt.feats), nullptr);
    DecodeResult res = beam_search_attention(model, enc, bc);
    dist += levenshtein(utt.labels, res.best);
    reflen += static_cast<long>(utt.labels.size());
  }
  return static_cast<double>(dist) / reflen;
}

int cmd_train(const RunConfig& cfg, const std::string& ckpt_path) {
  Model model(cfg.model_config(), cfg.seed);
  AdaDelta opt(model.params(), cfg.adadelta_rho, cfg.adadelta_eps);
  auto train_set = generate_toy_dataset(cfg.toy, cfg.n_train, kTrainStream);
  auto dev_set = generate_toy_dataset(cfg.toy, cfg.n_dev, kDevStream);
  MtlConfig mtl = cfg.train;
  mtl.seed = cfg.seed;

  checkpoint_save(ckpt_path, make_checkpoint(model.params(), cfg, 0));
  for (int epoch = 1; epoch <= mtl.epochs; ++epoch) {
    EpochStats st = train_epoch(model, opt, train_set, mtl, epoch);
    double dev_cer = greedy_dev_cer(model, dev_set);
    std::printf("%d\t%.6f\t%.6f\t%.6f\t%.6f\n", epoch, st.mean_ctc_nll,
                st.mean_att_nll, st.mean_mtl, dev_cer);
    std::fflush(stdout);
    checkpoint_save(ckpt_path, make_checkpoint(model.params(), cfg, epoch));
  }
  return 0;
}

int cmd_lm_train(const RunConfig& cfg, const std::string& ckpt_path) {
  Vocab vocab{cfg.toy.vocab_size};
  ParamStore store(cfg.seed ^ 0x4c4dull);
  RnnLm lm(store, vocab, cfg.lm_hidden);
  AdaDelta opt(store, cfg.adadelta_rho, cfg.adadelta_eps);
  auto train_set = generate_toy_dataset(cfg.toy, cfg.n_train, kTrainStream);

  checkpoint_save(ckpt_path, make_checkpoint(store, cfg, 0));
  std::vector<int> order(train_set.size());
  for (int epoch = 1; epoch <= cfg.train.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(cfg.seed + 0x5851f42d4c957f2dull * (epoch + 1));
    std::shuffle(order.begin(), order.end(), rng);
    double nll = 0.0;
    long tokens = 0;
    for (int idx : order) {
      store.zero_grads();
      nll += lm.sequence_nll(train_set[idx].labels, /*with_grad=*/true);
      tokens += static_cast<long>(train_set[idx].labels.size()) + 1;
      clip_grad_norm(store, cfg.train.clip_norm);
      opt.update(store);
    }
    std::printf("%d\t%.6f\n", epoch, std::exp(nll / tokens));
    std::fflush(stdout);
    checkpoint_save(ckpt_path, make_checkpoint(store, cfg, epoch));
  }
  return 0;
}

struct UttResult {
  ScoredSeq top;
  LabelSequence ref;
};

DecodeResult decode_one(const Model& model, const Mat& feats,
                        const BeamConfig& bc, const RnnLm* lm) {
  Mat enc = model.encode(model.make_features(feats), nullptr);
  switch (bc.mode) {
    case DecodeMode::kAttention:
      return beam_search_attention(model, enc, bc, lm);
    case DecodeMode::kRescoring: {
      DecodeResult att = beam_search_attention(model, enc, bc, lm);
      return rescore_with_ctc(model, enc, att, bc.lambda);
    }
    case DecodeMode::kOnePass:
    default:
      return beam_search_one_pass(model, enc, bc, lm);
  }
}

std::vector<Utterance> load_dataset_file(const std::string& path) {
  Checkpoint ckpt = checkpoint_load(path);
  std::vector<Utterance> out;
  for (std::size_t i = 0;; ++i) {
    char key[64];
    std::snprintf(key, sizeof(key), "utt%05zu", i);
    const Tensor* feats = ckpt.find(std::string(key) + ".feats");
    const Tensor* labels = ckpt.find(std::string(key) + ".labels");
    if (!feats) break;
    E2EA_CHECK(labels != nullptr, "dataset file missing labels for utterance");
    Utterance utt;
    utt.feats = Mat(feats->dims[0], feats->dims[1]);
    utt.feats.d = feats->data;
    for (double v : labels->data) utt.labels.push_back(static_cast<int>(v));
    out.push_back(std::move(utt));
  }
  E2EA_CHECK(!out.empty(), "dataset file contains no utterances");
  return out;
}

int cmd_decode(const RunConfig& cfg, const std::string& ckpt_path,
               const std::string& lm_ckpt_path, const std::string& out_path,
               const std::string& data_path) {
  Model model(cfg.model_config(), cfg.seed);
  checkpoint_to_params(checkpoint_load(ckpt_path), &model.params());

  std::unique_ptr<ParamStore> lm_store;
  std::unique_ptr<RnnLm> lm;
  if (cfg.beam.fusion.mode != FusionMode::kNone) {
    if (lm_ckpt_path.empty()) {
      std::cerr << "error: fusion mode requires --lm-ckpt\n";
      return kExitBadConfig;
    }
    lm_store = std::make_unique<ParamStore>(cfg.seed ^ 0x4c4dull);
    lm = std::make_unique<RnnLm>(*lm_store, model.vocab(), cfg.lm_hidden);
    checkpoint_to_params(checkpoint_load(lm_ckpt_path), lm_store.get());
  }

  std::vector<Utterance> test = data_path.empty()
                                    ? generate_toy_dataset(cfg.toy, cfg.n_test,
                                                           kTestStream)
                                    : load_dataset_file(data_path);

  int threads = 1;
  if (const char* env = std::getenv("E2EA_THREADS")) {
    threads = std::max(1, std::atoi(env));
  }
  threads = std::min<int>(threads, static_cast<int>(test.size()));

  std::vector<ScoredSeq> results(test.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= test.size()) break;
      DecodeResult r = decode_one(model, test[i].feats, cfg.beam, lm.get());
      results[i] = r.nbest.front();
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file) {
      std::cerr << "error: cannot open " << out_path << "\n";
      return kExitIoError;
    }
    out = &file;
  }
  long dist = 0, reflen = 0;
  char buf[256];
  for (std::size_t i = 0; i < test.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "utt%05zu", i);
    const ScoredSeq& top = results[i];
    (*out) << buf << "\t" << labels_to_string(test[i].labels) << "\t"
           << labels_to_string(top.seq) << "\t" << top.att << "\t" << top.ctc
           << "\t" << top.joint << "\n";
    dist += levenshtein(test[i].labels, top.seq);
    reflen += static_cast<long>(test[i].labels.size());
  }
  double corpus_cer = static_cast<double>(dist) / reflen;
  std::printf("CER\t%.6f\n", corpus_cer);
  return 0;
}

int cmd_eval(const std::string& results_path) {
  std::ifstream in(results_path);
  if (!in) {
    std::cerr << "error: cannot open " << results_path << "\n";
    return kExitIoError;
  }
  std::string line;
  long dist = 0, reflen = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line.rfind("CER\t", 0) == 0) continue;
    std::istringstream ss(line);
    std::string id, ref, hyp;
    if (!std::getline(ss, id, '\t') || !std::getline(ss, ref, '\t') ||
        !std::getline(ss, hyp, '\t')) {
      std::cerr << "error: malformed results line: " << line << "\n";
      return kExitIoError;
    }
    LabelSequence r = string_to_labels(ref), h = string_to_labels(hyp);
    dist += levenshtein(r, h);
    reflen += static_cast<long>(r.size());
  }
  if (reflen == 0) {
    std::cerr << "error: no references in " << results_path << "\n";
    return kExitIoError;
  }
  std::printf("CER\t%.6f\n", static_cast<double>(dist) / reflen);
  return 0;
}

int cmd_gradcheck(std::uint64_t seed) {
  auto checks = run_gradcheck_suite(seed);
  bool ok = true;
  for (const NamedCheck& c : checks) {
    bool pass = c.report.max_rel_err < 1e-4;
    std::printf("%s\t%s\trel_err=%.3e\tworst=%s[%d]\n", pass ? "ok" : "FAIL",
                c.name.c_str(), c.report.max_rel_err,
                c.report.worst_param.c_str(), c.report.worst_index);
    ok = ok && pass;
  }
  return ok ? 0 : kExitCheckFailure;
}

int cmd_gen_data(const RunConfig& cfg, const std::string& out_path,
                 const std::string& split, int n) {
  std::uint64_t stream = kTrainStream;
  if (split == "dev") stream = kDevStream;
  else if (split == "test") stream = kTestStream;
  else if (split != "train") {
    std::cerr << "error: split must be train, dev or test\n";
    return kExitBadConfig;
  }
  if (n <= 0)
    n = (split == "train") ? cfg.n_train : (split == "dev" ? cfg.n_dev : cfg.n_test);
  auto data = generate_toy_dataset(cfg.toy, n, stream);
  Checkpoint ckpt;
  for (std::size_t i = 0; i < data.size(); ++i) {
    char key[64];
    std::snprintf(key, sizeof(key), "utt%05zu", i);
    Tensor feats({data[i].feats.rows, data[i].feats.cols});
    feats.data = data[i].feats.d;
    ckpt.tensors.emplace_back(std::string(key) + ".feats", std::move(feats));
    Tensor labels({std::max(1, static_cast<int>(data[i].labels.size()))});
    for (std::size_t l = 0; l < data[i].labels.size(); ++l)
      labels(static_cast<int>(l)) = data[i].labels[l];
    ckpt.tensors.emplace_back(std::string(key) + ".labels", std::move(labels));
  }
  checkpoint_save(out_path, ckpt);
  std::printf("wrote %zu utterances to %s\n", data.size(), out_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"joint CTC/attention end-to-end speech recognition (toy scale)"};
  app.require_subcommand(1);

  std::string config_path, ckpt_path = "model.ckpt", lm_ckpt_path, out_path,
              data_path, split = "test", results_path;
  std::int64_t seed_override = -1;
  double lambda_override = -1.0, gamma_override = -1.0;
  int beam_override = 0, n_override = 0;
  std::string mode_override;

  auto add_common = [&](CLI::App* cmd, bool need_config) {
    auto* opt = cmd->add_option("--config", config_path, "config file path");
    if (need_config) opt->required();
    cmd->add_option("--seed", seed_override, "overrides config seed");
  };

  CLI::App* train = app.add_subcommand("train", "multi-task training");
  add_common(train, true);
  train->add_option("--ckpt", ckpt_path, "checkpoint output path");

  CLI::App* lm_train = app.add_subcommand("lm-train", "character RNN-LM training");
  add_common(lm_train, true);
  lm_train->add_option("--ckpt", ckpt_path, "LM checkpoint output path");

  CLI::App* decode = app.add_subcommand("decode", "beam-search decoding");
  add_common(decode, true);
  decode->add_option("--ckpt", ckpt_path, "model checkpoint")->required();
  decode->add_option("--lm-ckpt", lm_ckpt_path, "LM checkpoint (for fusion)");
  decode->add_option("--out", out_path, "results file (default stdout)");
  decode->add_option("--data", data_path, "dataset file (default: generated)");
  decode->add_option("--mode", mode_override, "attention|rescoring|one-pass");
  decode->add_option("--lambda", lambda_override, "decode-time lambda");
  decode->add_option("--beam", beam_override, "beam width");
  decode->add_option("--gamma", gamma_override, "LM fusion scale");

  CLI::App* eval = app.add_subcommand("eval", "corpus CER from a results file");
  eval->add_option("--results", results_path, "decode results file")->required();

  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference suite");
  gradcheck->add_option("--seed", seed_override, "base seed");

  CLI::App* gen = app.add_subcommand("gen-data", "write a toy dataset file");
  add_common(gen, true);
  gen->add_option("--out", out_path, "output path")->required();
  gen->add_option("--split", split, "train|dev|test");
  gen->add_option("--n", n_override, "utterance count (default from config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : kExitBadConfig;
  }

  try {
    if (gradcheck->parsed())
      return cmd_gradcheck(seed_override >= 0 ? seed_override : 1);
    if (eval->parsed()) return cmd_eval(results_path);

    RunConfig cfg = load_config(config_path);
    if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
    if (!mode_override.empty()) {
      if (mode_override == "attention") cfg.beam.mode = DecodeMode::kAttention;
      else if (mode_override == "rescoring") cfg.beam.mode = DecodeMode::kRescoring;
      else if (mode_override == "one-pass") cfg.beam.mode = DecodeMode::kOnePass;
      else throw std::invalid_argument("bad --mode: " + mode_override);
    }
    if (lambda_override >= 0.0) cfg.beam.lambda = lambda_override;
    if (gamma_override >= 0.0) cfg.beam.fusion.gamma = gamma_override;
    if (!lm_ckpt_path.empty() && cfg.beam.fusion.mode == FusionMode::kNone)
      cfg.beam.fusion.mode = FusionMode::kSeparate;
    if (beam_override > 0) cfg.beam.beam_width = beam_override;
    cfg.validate();

    if (train->parsed()) return cmd_train(cfg, ckpt_path);
    if (lm_train->parsed()) return cmd_lm_train(cfg, ckpt_path);
    if (decode->parsed())
      return cmd_decode(cfg, ckpt_path, lm_ckpt_path, out_path, data_path);
    if (gen->parsed()) return cmd_gen_data(cfg, out_path, split, n_override);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadConfig;
  } catch (const e2ea::CheckpointError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIoError;
  } catch (const std::ios_base::failure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIoError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCheckFailure;
  }
  return 0;
}
