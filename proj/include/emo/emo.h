#ifndef EMO_EMO_H
#define EMO_EMO_H

#include <stddef.h>
#include <stdint.h>

#if defined(EMO_BUILDING_LIBRARY)
#define EMO_API __attribute__((visibility("default")))
#else
#define EMO_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum emo_status {
  EMO_OK = 0,
  EMO_ERR_INVALID_ARGUMENT = 1,
  EMO_ERR_CONFIG = 2,
  EMO_ERR_SHAPE = 3,
  EMO_ERR_STATE = 4,
  EMO_ERR_IO = 5,
  EMO_ERR_NUMERIC = 6,
  EMO_ERR_VERSION = 7,
  EMO_ERR_INTERNAL = 8
} emo_status;

typedef struct emo_config emo_config;
typedef struct emo_run emo_run;

/* Message for the most recent failure on the calling thread ("" if none). */
EMO_API const char* emo_last_error(void);
EMO_API const char* emo_version(void);
EMO_API const char* emo_status_name(emo_status status);

/* ---- Configuration ---- */
EMO_API emo_status emo_config_create(emo_config** out);
/* path may be NULL; overrides from EMO__SECTION__KEY environment variables apply when use_env != 0. */
EMO_API emo_status emo_config_load(const char* path, int use_env, emo_config** out);
EMO_API emo_status emo_config_parse(const char* text, emo_config** out);
EMO_API emo_status emo_config_set(emo_config* config, const char* key, const char* value);
/* Copies the value into buf (NUL-terminated); *needed receives the full length + 1. */
EMO_API emo_status emo_config_get(const emo_config* config, const char* key, char* buf, size_t size, size_t* needed);
EMO_API emo_status emo_config_serialize(const emo_config* config, char* buf, size_t size, size_t* needed);
EMO_API emo_status emo_config_validate(const emo_config* config);
EMO_API void emo_config_destroy(emo_config* config);

/* ---- First layer ---- */
typedef struct emo_ram_report {
  double mae_valence;
  double mae_arousal;
  double final_mse;
  size_t epochs;
} emo_ram_report;

/* Generates the synthetic corpus, trains and writes a checkpoint plus
   <out_dir>/ram_curve.csv. epochs == 0 uses ram.epochs. */
EMO_API emo_status emo_train_ram(const emo_config* config, uint64_t seed, size_t epochs, const char* out_dir,
                                 emo_ram_report* report);

/* ---- Interaction runs ---- */
typedef struct emo_epoch_record {
  uint64_t epoch;
  int category;
  double valence;
  double arousal;
  double ia;
  double reward;
  double pred_loss;
  double controls[4];
  int expression; /* 0 pleasure, 1 anger, 2 sadness, 3 neutral */
} emo_epoch_record;

/* In-memory simulation; run.ram_checkpoint must name a ram checkpoint. */
EMO_API emo_status emo_run_create(const emo_config* config, emo_run** out);
EMO_API emo_status emo_run_step(emo_run* run, emo_epoch_record* record);
EMO_API emo_status emo_run_epoch(const emo_run* run, uint64_t* epoch);
EMO_API emo_status emo_run_set_learning(emo_run* run, int enabled);
EMO_API emo_status emo_run_save_checkpoint(const emo_run* run, const char* path);
/* Reopens a checkpoint; ram_checkpoint may be NULL to use the one recorded in its config. */
EMO_API emo_status emo_run_open_checkpoint(const char* path, const char* ram_checkpoint, emo_run** out);
EMO_API void emo_run_destroy(emo_run* run);

/* Full run into a directory (logs, checkpoints, snapshot). */
EMO_API emo_status emo_execute(const emo_config* config, const char* out_dir, uint64_t* final_epoch);
/* checkpoint may be NULL (latest); epochs 0 keeps the recorded total; seed_override applies when has_seed != 0. */
EMO_API emo_status emo_resume(const char* run_dir, const char* checkpoint, size_t epochs, int has_seed,
                              uint64_t seed_override, uint64_t* final_epoch);

/* Reports for run directories; notices (newline separated) go to buf when non-NULL. */
EMO_API emo_status emo_analyze(const char* const* run_dirs, size_t count, const char* out_dir, size_t bands,
                               char* buf, size_t size, size_t* needed);

#ifdef __cplusplus
}
#endif

#endif
