// Command line front end: four subcommands sharing one option set.
#include <CLI11.hpp>

#include <acsplit/cli.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{
      "Spectral splitting schemes for a stochastic reaction-diffusion "
      "equation: sample paths, weak/strong convergence ladders, and "
      "derivative-bound probes"};
  app.require_subcommand(1);

  acsplit::CliOptions opts;
  const struct {
    const char* name;
    const char* help;
  } commands[] = {
      {"simulate", "integrate one sample path and write the terminal field"},
      {"weak", "coupled weak-error ladder with a rate fit"},
      {"strong", "coupled strong-error ladder with a rate fit"},
      {"probe", "derivative regularity scans and noise-derivative bounds"},
  };
  for (const auto& cmd : commands) {
    CLI::App* sub = app.add_subcommand(cmd.name, cmd.help);
    sub->add_option("--config", opts.config_path,
                    "key = value config file; flags below override it");
    sub->add_option("--out", opts.out_dir, "output directory")
        ->capture_default_str();
    sub->add_option("--seed", opts.seed, "master seed")
        ->each([&opts](const std::string&) { opts.have_seed = true; });
    sub->add_option("--threads", opts.threads, "worker threads")
        ->each([&opts](const std::string&) { opts.have_threads = true; });
    sub->callback([&opts, name = cmd.name] { opts.command = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
  return acsplit::run_command(opts, std::cout, std::cerr);
}
