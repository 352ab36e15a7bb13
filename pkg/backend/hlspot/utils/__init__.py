# Arquivo vazio para tornar utils um pacote Python
