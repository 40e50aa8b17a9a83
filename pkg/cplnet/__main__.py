from cplnet.cli.main import run

run()
