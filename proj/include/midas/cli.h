// cli.h: the `midas` command line.
//
//   midas ingest           turns file -> corpus file (optional segmenter, annotations)
//   midas segment train|apply|eval
//   midas context build    corpus -> rendered classifier examples
//   midas da train|predict|transfer, midas da eval prf|model
//   midas swda map|table|build
//   midas eval prf|kappa
//   midas scheme export|validate
//   midas serve            annotation service over HTTP
//
// Defaults for any flag can come from a TOML file given by --config or the
// MIDAS_CONFIG environment variable, with one [section] per subcommand path
// ([da.train], [segment.train], ...).
//
// Exit codes: 0 success, 2 usage, 3 data, 4 model. Failures print one line
// `error[<category>]: <detail>` on stderr.

#ifndef MIDAS_CLI_H_
#define MIDAS_CLI_H_

#include <iosfwd>
#include <string>
#include <vector>

namespace midas {

inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitModel = 4;

// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace midas

#endif  // MIDAS_CLI_H_
