// http_api.h: JSON over HTTP for the annotation service.
//
//   GET  /health                       service status
//   GET  /scheme                       tags, tree nodes, exclusions
//   POST /validate    {labels}         verdict without storing anything
//   POST /annotators  {annotator_id}   201 new, 200 already known
//   POST /tasks/next  {annotator_id}   {"task": {...} | null}
//   POST /submit      {annotator_id, segment_id, labels, completed_text?}
//                                      200 accepted/duplicate, 422 rejected, 409 locked
//   GET  /suggest?segment_id=ID        {"enabled": false} without a model
//   GET  /agreement                    coverage and pairwise kappa
//   GET  /export                       annotated corpus file (JSON lines)
//
// Errors are {"error": {"category": ..., "message": ...}} with 400 for bad
// requests and 404 for unknown annotators or segments.

#ifndef MIDAS_HTTP_API_H_
#define MIDAS_HTTP_API_H_

#include <filesystem>
#include <memory>
#include <string>
#include <thread>

#include "midas/service.h"

namespace midas {

struct ServerConfig {
  std::string corpus;
  std::string log;
  std::string model;    // optional
  std::string vectors;  // optional, for a precomputed-vector model
  int lock_ttl_seconds = 600;
  std::string host = "127.0.0.1";
  int port = 8080;
  bool include_machine_segments = false;

  // JSON object with the field names above; relative paths are taken
  // relative to the file's directory.
  static ServerConfig load(const std::filesystem::path& path);
};

// JSON bodies, exposed for tests and the command line.
std::string scheme_json(const Taxonomy& taxonomy);
std::string task_json(const AnnotationTask& task, const Taxonomy& taxonomy);
std::string agreement_json(const AgreementReport& report);

class ApiServer {
 public:
  explicit ApiServer(AnnotationService& service);
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  // Port 0 picks a free port. Returns the bound port; throws UsageError when
  // binding fails.
  int bind(const std::string& host, int port);
  // Serves until stop(); blocks.
  void run();
  // Serves on a background thread.
  void start();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::thread thread_;
};

}  // namespace midas

#endif  // MIDAS_HTTP_API_H_
