#include "shepherd/cli.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <iostream>

int main(int argc, char** argv) {
    spdlog::set_default_logger(spdlog::stderr_color_mt("shepherd"));
    return shepherd::cli::run(argc, argv, std::cout, std::cerr);
}
