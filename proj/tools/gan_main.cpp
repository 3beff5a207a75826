// Checkpoint inspector.
#include <cstdio>

#include <CLI11.hpp>

#include "cli_common.hpp"
#include "pek/checkpoint.hpp"

int main(int argc, char** argv) {
    CLI::App app{"model checkpoint utilities"};
    app.require_subcommand(1);

    std::string path;
    CLI::App* in = app.add_subcommand("inspect", "print a checkpoint descriptor");
    in->add_option("ckpt", path, "checkpoint file")->required();

    CLI11_PARSE(app, argc, argv);
    return pek::cli::guarded([&] {
        std::printf("%s\n", pek::ckpt::inspect(path).dump(2).c_str());
        return 0;
    });
}
