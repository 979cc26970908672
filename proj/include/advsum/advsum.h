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


/* C interface to the advsum library. Every function that can fail returns an
 * advsum_status; the message of the most recent failure on the calling
 * thread is available from advsum_last_error(). Strings returned through
 * out-parameters are owned by the caller and released with
 * advsum_string_free(). */

#ifndef ADVSUM_ADVSUM_H_
#define ADVSUM_ADVSUM_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define ADVSUM_API __declspec(dllexport)
#else
#define ADVSUM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum advsum_status {
  ADVSUM_OK = 0,
  ADVSUM_INVALID_ARGUMENT = 1,
  ADVSUM_IO = 2,
  ADVSUM_PARSE = 3,
  ADVSUM_PROVIDER = 4,
  ADVSUM_MISMATCH = 5,
  ADVSUM_BUDGET = 6,
  ADVSUM_INTERNAL = 7,
} advsum_status;

typedef struct advsum_config advsum_config;

ADVSUM_API const char* advsum_version(void);
/* Empty string when the last call on this thread succeeded. */
ADVSUM_API const char* advsum_last_error(void);
ADVSUM_API const char* advsum_status_name(advsum_status status);
ADVSUM_API void advsum_string_free(char* s);

/* Configuration with every key at its default. */
ADVSUM_API advsum_status advsum_config_create(advsum_config** out);
ADVSUM_API void advsum_config_free(advsum_config* cfg);
ADVSUM_API advsum_status advsum_config_load_file(advsum_config* cfg, const char* path);
ADVSUM_API advsum_status advsum_config_set(advsum_config* cfg, const char* key,
                                           const char* value);
/* Parses "key=value". */
ADVSUM_API advsum_status advsum_config_set_assignment(advsum_config* cfg,
                                                      const char* assignment);
ADVSUM_API advsum_status advsum_config_get(const advsum_config* cfg, const char* key,
                                           char** out_value);
/* Sorted "key=value" lines. */
ADVSUM_API advsum_status advsum_config_dump(const advsum_config* cfg, char** out_text);
ADVSUM_API int advsum_config_is_known_key(const char* key);

/* Pipeline steps. Each writes its artifacts and effective_config.txt into
 * out_dir and, when out_summary is not NULL, a one-line "key=value ..."
 * summary. */
ADVSUM_API advsum_status advsum_prepare_data(const advsum_config* cfg, const char* out_dir,
                                             char** out_summary);
ADVSUM_API advsum_status advsum_train_surrogate(const advsum_config* cfg, const char* out_dir,
                                                char** out_summary);
ADVSUM_API advsum_status advsum_generate_attacks(const advsum_config* cfg, const char* out_dir,
                                                 char** out_summary);
ADVSUM_API advsum_status advsum_evaluate(const advsum_config* cfg, const char* out_dir,
                                         char** out_summary);
ADVSUM_API advsum_status advsum_meta_prompt(const advsum_config* cfg, const char* out_dir,
                                            char** out_summary);
ADVSUM_API advsum_status advsum_report(const advsum_config* cfg, const char* out_dir,
                                       char** out_summary);

/* Two-decimal percentage of num/den, rounded half up. */
ADVSUM_API advsum_status advsum_percentage(uint64_t num, uint64_t den, char** out_text);

#ifdef __cplusplus
}
#endif

#endif  // ADVSUM_ADVSUM_H_
