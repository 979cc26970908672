// Copyright 2026 The advsum Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "advsum/advsum.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <string>

#include "advsum/config.hpp"
#include "advsum/error.hpp"
#include "advsum/harness.hpp"
#include "advsum/pipeline.hpp"

struct advsum_config {
  advsum::Config config;
};

namespace {

thread_local std::string g_last_error;

char* Dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

template <typename F>
advsum_status Guard(F&& body) {
  g_last_error.clear();
  try {
    body();
    return ADVSUM_OK;
  } catch (const advsum::Error& e) {
    g_last_error = e.what();
    return static_cast<advsum_status>(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return ADVSUM_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return ADVSUM_INTERNAL;
  }
}

void NotNull(const void* p, const char* what) {
  if (!p) throw advsum::InvalidArgument(std::string(what) + " is NULL");
}

using Step = advsum::Summary (*)(const advsum::Config&, const std::filesystem::path&);

advsum_status RunStep(Step step, const advsum_config* cfg, const char* out_dir,
                      char** out_summary) {
  return Guard([&] {
    NotNull(cfg, "config");
    NotNull(out_dir, "out_dir");
    auto summary = advsum::RenderSummary(step(cfg->config, out_dir));
    if (out_summary) *out_summary = Dup(summary);
  });
}

}  // namespace

extern "C" {

const char* advsum_version(void) { return "0.1.0"; }

const char* advsum_last_error(void) { return g_last_error.c_str(); }

const char* advsum_status_name(advsum_status status) {
  switch (status) {
    case ADVSUM_OK: return "ok";
    case ADVSUM_INVALID_ARGUMENT: return "invalid_argument";
    case ADVSUM_IO: return "io";
    case ADVSUM_PARSE: return "parse";
    case ADVSUM_PROVIDER: return "provider";
    case ADVSUM_MISMATCH: return "mismatch";
    case ADVSUM_BUDGET: return "budget";
    case ADVSUM_INTERNAL: return "internal";
  }
  return "unknown";
}

void advsum_string_free(char* s) { std::free(s); }

advsum_status advsum_config_create(advsum_config** out) {
  return Guard([&] {
    NotNull(out, "out");
    *out = new advsum_config();
  });
}

void advsum_config_free(advsum_config* cfg) { delete cfg; }

advsum_status advsum_config_load_file(advsum_config* cfg, const char* path) {
  return Guard([&] {
    NotNull(cfg, "config");
    NotNull(path, "path");
    cfg->config.LoadFile(path);
  });
}

advsum_status advsum_config_set(advsum_config* cfg, const char* key, const char* value) {
  return Guard([&] {
    NotNull(cfg, "config");
    NotNull(key, "key");
    NotNull(value, "value");
    cfg->config.Set(key, value);
  });
}

advsum_status advsum_config_set_assignment(advsum_config* cfg, const char* assignment) {
  return Guard([&] {
    NotNull(cfg, "config");
    NotNull(assignment, "assignment");
    cfg->config.SetAssignment(assignment);
  });
}

advsum_status advsum_config_get(const advsum_config* cfg, const char* key, char** out_value) {
  return Guard([&] {
    NotNull(cfg, "config");
    NotNull(key, "key");
    NotNull(out_value, "out_value");
    *out_value = Dup(cfg->config.Get(key));
  });
}

advsum_status advsum_config_dump(const advsum_config* cfg, char** out_text) {
  return Guard([&] {
    NotNull(cfg, "config");
    NotNull(out_text, "out_text");
    *out_text = Dup(cfg->config.Dump());
  });
}

int advsum_config_is_known_key(const char* key) {
  return key && advsum::Config::IsKnownKey(key) ? 1 : 0;
}

advsum_status advsum_prepare_data(const advsum_config* cfg, const char* out_dir,
                                  char** out_summary) {
  return RunStep(&advsum::PrepareData, cfg, out_dir, out_summary);
}

advsum_status advsum_train_surrogate(const advsum_config* cfg, const char* out_dir,
                                     char** out_summary) {
  return RunStep(&advsum::TrainSurrogate, cfg, out_dir, out_summary);
}

advsum_status advsum_generate_attacks(const advsum_config* cfg, const char* out_dir,
                                      char** out_summary) {
  return RunStep(&advsum::GenerateAttacks, cfg, out_dir, out_summary);
}

advsum_status advsum_evaluate(const advsum_config* cfg, const char* out_dir,
                              char** out_summary) {
  return RunStep(&advsum::Evaluate, cfg, out_dir, out_summary);
}

advsum_status advsum_meta_prompt(const advsum_config* cfg, const char* out_dir,
                                 char** out_summary) {
  return RunStep(&advsum::MetaPrompt, cfg, out_dir, out_summary);
}

advsum_status advsum_report(const advsum_config* cfg, const char* out_dir, char** out_summary) {
  return RunStep(&advsum::Report, cfg, out_dir, out_summary);
}

advsum_status advsum_percentage(uint64_t num, uint64_t den, char** out_text) {
  return Guard([&] {
    NotNull(out_text, "out_text");
    *out_text = Dup(advsum::Percentage{num, den}.Render());
  });
}

}  // extern "C"
