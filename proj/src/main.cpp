namespace fermicorr { int cli_main(int argc, char** argv); }
int main(int argc, char** argv) { return fermicorr::cli_main(argc, argv); }
