#ifndef BOHM_BOHM_H
#define BOHM_BOHM_H

/* C interface to the bohm library. Objects are opaque handles; every call
 * returns a status code and, on failure, leaves a message retrievable with
 * bohm_last_error() on the calling thread. */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(__GNUC__)
#define BOHM_API __attribute__((visibility("default")))
#else
#define BOHM_API
#endif

typedef enum {
  BOHM_OK = 0,
  BOHM_ERR_INVALID = 1,        /* malformed or out-of-contract input */
  BOHM_ERR_NODE = 2,           /* evaluation at a node of the wave */
  BOHM_ERR_NUMERICAL = 3,      /* integration failure, undefined quantity */
  BOHM_ERR_UNDER_RESOLVED = 4, /* truncation or grid too coarse */
  BOHM_ERR_IO = 5,
  BOHM_ERR_CHECK = 6,          /* a threshold check failed */
  BOHM_ERR_INTERNAL = 7
} bohm_status;

BOHM_API const char* bohm_version(void);
BOHM_API const char* bohm_last_error(void);
BOHM_API const char* bohm_status_name(bohm_status s);

/* --- Klein-Gordon waves ---------------------------------------------------- */

typedef struct bohm_wave bohm_wave;

/* n modes with wave vectors k[i*dim .. i*dim+dim) and amplitudes re + i im.
 * plane_waves != 0 reads the amplitudes as coefficients of exp(-i k.x). */
BOHM_API bohm_status bohm_wave_create(double mass, int dim, size_t n, const double* k, const double* re,
                                      const double* im, int plane_waves, bohm_wave** out);
BOHM_API void bohm_wave_free(bohm_wave* w);

/* x holds (t, x^1..x^dim). */
BOHM_API bohm_status bohm_wave_eval(const bohm_wave* w, const double* x, double* re, double* im);
/* Covariant current j_mu, dim + 1 entries. */
BOHM_API bohm_status bohm_wave_current(const bohm_wave* w, const double* x, double* j);
BOHM_API bohm_status bohm_wave_particle_number(const bohm_wave* w, double* n);

/* --- trajectories ------------------------------------------------------------ */

typedef struct bohm_path bohm_path;

BOHM_API bohm_status bohm_path_integrate(const bohm_wave* w, const double* x0, double tau_span, double tol,
                                         bohm_path** out);
BOHM_API void bohm_path_free(bohm_path* p);
BOHM_API size_t bohm_path_size(const bohm_path* p);
/* Point i: its parameter tau and the coordinates (t, x^1..x^dim). */
BOHM_API bohm_status bohm_path_point(const bohm_path* p, size_t i, double* tau, double* x);
BOHM_API size_t bohm_path_reversal_count(const bohm_path* p);
BOHM_API bohm_status bohm_path_reversal(const bohm_path* p, size_t i, double* tau, double* x, double* j0);
/* Signs of j0 where the path meets the slice t = t_slice, in parameter order.
 * Writes up to cap signs and the total number to *count. */
BOHM_API bohm_status bohm_path_crossings(const bohm_path* p, double t_slice, int* signs, size_t cap, size_t* count);

/* --- lattice field --------------------------------------------------------- */

typedef struct bohm_lattice bohm_lattice;

BOHM_API bohm_status bohm_lattice_create(int modes, int n_max, double mass, double coupling, double box,
                                         bohm_lattice** out);
BOHM_API void bohm_lattice_free(bohm_lattice* l);
BOHM_API size_t bohm_lattice_basis_size(const bohm_lattice* l);
/* exp(-i H t) applied to the coefficient vector (re, im) of basis_size entries. */
BOHM_API bohm_status bohm_lattice_evolve(const bohm_lattice* l, const double* re, const double* im, double t,
                                         double* re_out, double* im_out);
/* psi_n at equal time t for a state given at time 0; x holds n positions. */
BOHM_API bohm_status bohm_lattice_wave_function(const bohm_lattice* l, const double* re, const double* im, double t,
                                                int n, const double* x, double* out_re, double* out_im);

/* --- scenarios --------------------------------------------------------------- */

typedef struct bohm_run bohm_run;

typedef struct {
  int has_seed;
  uint64_t seed;
  const char* out_dir; /* NULL or empty: nothing is written */
} bohm_run_options;

/* Runs a JSON scenario. On BOHM_OK *out holds the result; on other codes *out
 * is NULL. Check failures do not change the status: inspect the checks. */
BOHM_API bohm_status bohm_run_config(const char* config_json, const bohm_run_options* opts, bohm_run** out);
BOHM_API bohm_status bohm_run_preset(const char* name, const bohm_run_options* opts, bohm_run** out);
BOHM_API void bohm_run_free(bohm_run* r);
BOHM_API int bohm_run_passed(const bohm_run* r);
BOHM_API size_t bohm_run_check_count(const bohm_run* r);
BOHM_API bohm_status bohm_run_check(const bohm_run* r, size_t i, const char** name, double* value, double* lo,
                                    double* hi, int* passed);
BOHM_API const char* bohm_run_checks_table(const bohm_run* r);
BOHM_API const char* bohm_run_summary(const bohm_run* r);
BOHM_API size_t bohm_run_output_count(const bohm_run* r);
BOHM_API const char* bohm_run_output(const bohm_run* r, size_t i);

BOHM_API size_t bohm_preset_count(void);
BOHM_API const char* bohm_preset_name(size_t i);
BOHM_API const char* bohm_preset_description(size_t i);
/* JSON text of the preset config, or NULL for an unknown name. */
BOHM_API const char* bohm_preset_config(const char* name);

#ifdef __cplusplus
}
#endif

#endif
